import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cpt_joint_dict, random_scm, scm_joint_dict
from pathfx.errors import (
    CycleDetected,
    DuplicateName,
    IncompleteMechanismTable,
    MissingCpt,
    RowNotNormalized,
    UnknownVariable,
    ValueOutOfDomain,
)
from pathfx.model import (
    ChannelRule,
    Cpt,
    CptModel,
    Domain,
    Mechanism,
    NoiseSpec,
    Scm,
    VariableSpec,
    build_cpt_model,
    cpt_to_scm,
    decompose,
    fix_parent,
    recompose,
    scm_to_cpt,
    topological_sort,
)


def chain():
    return build_cpt_model(
        {"A": ["0", "1"], "Y": ["0", "1"]},
        [Cpt("A", (), [0.3, 0.7]), Cpt("Y", ("A",), {("0",): [0.9, 0.1], "1": [0.2, 0.8]})],
    )


def test_domain_rejects_duplicates_and_empty():
    with pytest.raises(DuplicateName):
        Domain(("0", "0"))
    with pytest.raises(Exception):
        Domain(())
    with pytest.raises(ValueOutOfDomain):
        Domain(("a",)).index("b")


def test_cpt_model_basics():
    m = chain()
    assert m.names == ("A", "Y")
    assert m.parents("Y") == ("A",)
    assert m.children("A") == ("Y",)
    assert m.table("Y").shape == (2, 2)
    assert m.joint().sum() == pytest.approx(1.0)
    assert m.joint()[1, 1] == pytest.approx(0.56)


def test_unnormalized_row_is_rejected():
    with pytest.raises(RowNotNormalized) as e:
        build_cpt_model({"A": ["0", "1"]}, [Cpt("A", (), [0.5, 0.6])])
    assert e.value.variable == "A"


def test_missing_row_and_missing_cpt():
    with pytest.raises(MissingCpt):
        build_cpt_model(
            {"A": ["0", "1"], "Y": ["0", "1"]},
            [Cpt("A", (), [0.5, 0.5]), Cpt("Y", ("A",), {"0": [1.0, 0.0]})],
        )
    with pytest.raises(MissingCpt):
        build_cpt_model({"A": ["0", "1"], "Y": ["0"]}, [Cpt("A", (), [0.5, 0.5])])


def test_unknown_parent_and_cycle():
    with pytest.raises(UnknownVariable):
        build_cpt_model({"A": ["0"]}, [Cpt("A", ("B",), {"0": [1.0]})])
    with pytest.raises(CycleDetected) as e:
        build_cpt_model(
            {"A": ["0"], "B": ["0"]},
            [Cpt("A", ("B",), {"0": [1.0]}), Cpt("B", ("A",), {"0": [1.0]})],
        )
    assert set(e.value.cycle) >= {"A", "B"}


def test_topological_sort_is_lexicographic():
    assert topological_sort(["C", "B", "A"], {"A": (), "B": (), "C": ("B",)}) == ("A", "B", "C")
    assert topological_sort(["Z", "A"], {"Z": (), "A": ("Z",)}) == ("Z", "A")


def test_scm_needs_total_table():
    with pytest.raises(IncompleteMechanismTable):
        Scm(
            (VariableSpec("A", Domain(("0", "1"))),),
            (NoiseSpec("U", Domain(("u0", "u1")), (0.5, 0.5)),),
            (Mechanism("A", (), "U", {((), "u0"): "0"}),),
        )


def test_scm_to_cpt_matches_noise_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(20):
        scm = random_scm(rng)
        brute = scm_joint_dict(scm)
        cpt = cpt_joint_dict(scm_to_cpt(scm))
        for key, p in cpt.items():
            assert brute.get(key, 0.0) == pytest.approx(p, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cpt_to_scm_reproduces_cpts(seed):
    model = scm_to_cpt(random_scm(np.random.default_rng(seed)))
    back = scm_to_cpt(cpt_to_scm(model))
    for n in model.names:
        assert np.abs(model.table(n) - back.table(n)).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_joint_is_normalized(seed):
    scm = random_scm(np.random.default_rng(seed))
    assert math.isclose(scm.joint().sum(), 1.0, abs_tol=1e-9)
    assert math.isclose(scm_to_cpt(scm).joint().sum(), 1.0, abs_tol=1e-9)


def test_decompose_recompose_is_identity(models):
    scm = models["f1_scm"]
    dec = decompose(scm)
    assert all(c.rule is ChannelRule.COPY for c in dec.channels)
    again = recompose(dec)
    for n in scm.names:
        assert dict(again.mechanism(n).table) == dict(scm.mechanism(n).table)


def test_literal_channel_keeps_the_source_mechanism(models):
    scm = models["f1_scm"]
    dec = decompose(scm).with_literal("A", "M", "1")
    out = recompose(dec)
    assert out.mechanism("A") == scm.mechanism("A")
    assert out.parents("M") == ()
    assert out.parents("Y") == ("A", "M")
    noise = {n: scm.noise_of(n).domain.values[-1] for n in scm.names}
    solved = dec.solve(noise)
    assert solved["M"] == scm.mechanism("M")(("1",), noise["M"])


def test_fix_parent_drops_column():
    m = Mechanism("Y", ("A", "B"), "U", {(("0", "0"), "u"): "0", (("0", "1"), "u"): "1",
                                          (("1", "0"), "u"): "1", (("1", "1"), "u"): "0"})
    f = fix_parent(m, "A", "1")
    assert f.parents == ("B",)
    assert dict(f.table) == {(("0",), "u"): "1", (("1",), "u"): "0"}
