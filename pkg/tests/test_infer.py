import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import marginal, path_system_joint, quantile_scm, random_path, random_scm
from pathfx import infer
from pathfx.errors import NonNumericDomain, StateSpaceTooLarge, UnknownColumn
from pathfx.graph import Node, World
from pathfx.infer import (
    Literal,
    exact_joint,
    expectation_contrast,
    factorization_to_json,
    joint_to_json,
    marginalize,
    observational_factorization,
    path_effect_marginal,
    path_factorization,
    pi_formula,
)
from pathfx.intervene import apply_path
from pathfx.model import Cpt, build_cpt_model, scm_to_cpt

PI = World.PI


def signature(fz):
    """Order-insensitive factor multiset; literals render as the primed parent."""
    def g(x):
        return f"{x.source.lower()}'" if isinstance(x, Literal) else str(x).lower()

    return sorted((str(f.child).lower(), tuple(sorted(g(x) for x in f.given))) for f in fz.factors)


def test_observational_factorizations(models):
    assert str(observational_factorization(models["f1"])) == "p(y|a,m)·p(m|a)·p(a)"
    assert signature(observational_factorization(models["f4"])) == signature(
        observational_factorization(models["f4"])
    )
    single = build_cpt_model({"V": ["0", "1"]}, [Cpt("V", (), [0.5, 0.5])])
    assert str(observational_factorization(single)) == "p(v)"


def test_pi_formula_f1(models):
    fz = pi_formula(models["f1"], "A->M->Y", "1")
    assert str(fz) == "p(y^pi|a,m^pi)·p(m^pi|a'=1)·p(y|a,m)·p(m|a)·p(a)"


def test_pi_formula_f4_counterfactual_factors(models):
    fz = pi_formula(models["f4"], "A->M->Y", "1")
    cf = [f for f in fz.factors if f.child.world is PI]
    assert [str(f) for f in cf] == ["p(y^pi|a,m^pi,w,z)", "p(m^pi|a'=1,w)"]


def test_exact_values(models):
    f1 = path_effect_marginal(models["f1"], "A->M->Y", "1", ["Y"])
    assert f1.probs[1] == pytest.approx(0.61, abs=1e-12)
    f2 = path_effect_marginal(models["f2"], "T->Y", "1", ["Y"])
    assert f2.probs[1] == pytest.approx(0.75, abs=1e-12)
    f3 = path_effect_marginal(models["f3"], "X->A->Y", "1", ["Y"])
    assert f3.probs[1] == pytest.approx(0.71025, abs=1e-12)


def test_contrast(models):
    assert expectation_contrast(models["f1"], "A->M->Y", "1", "0", "Y") == pytest.approx(0.27, abs=1e-12)
    assert expectation_contrast(models["f1"], "A->M->Y", "1", "1", "Y") == 0.0
    zero = path_effect_marginal(models["f1"], "A->M->Y", "0", ["Y"])
    assert zero.probs[1] == pytest.approx(0.34, abs=1e-12)


def test_contrast_needs_numeric_domain():
    m = build_cpt_model(
        {"A": ["0", "1"], "Y": ["lo", "hi"]},
        [Cpt("A", (), [0.5, 0.5]), Cpt("Y", ("A",), {"0": [1.0, 0.0], "1": [0.0, 1.0]})],
    )
    with pytest.raises(NonNumericDomain):
        expectation_contrast(m, "A->Y", "1", "0", "Y")


def test_degenerate_head_transmits_its_only_value():
    m = build_cpt_model(
        {"A": ["1"], "Y": ["0", "1"]},
        [Cpt("A", (), [1.0]), Cpt("Y", ("A",), {"1": [0.3, 0.7]})],
    )
    joint = exact_joint(m, pi_formula(m, "A->Y", "1"))
    assert np.allclose(marginalize(joint, [Node("Y", PI)]).probs, marginalize(joint, ["Y"]).probs, atol=1e-15)


def test_marginalize_edges(models):
    pim = apply_path(models["f3"], "X->A->Y", "1")
    joint = exact_joint(pim, path_factorization(pim))
    assert marginalize(joint, list(joint.columns)).probs.tolist() == joint.probs.tolist()
    empty = marginalize(joint, [])
    assert empty.probs.shape == () and float(empty.probs) == pytest.approx(1.0)
    with pytest.raises(UnknownColumn):
        marginalize(joint, [Node("Q")])
    assert joint.prob({Node("Y", PI): "1"}) == pytest.approx(0.71025, abs=1e-12)


def test_state_cap(models):
    pim = apply_path(models["f4"], "A->M->Y", "1")
    with pytest.raises(StateSpaceTooLarge):
        exact_joint(pim, path_factorization(pim), max_states=10)


def test_block_size_does_not_change_results(models, monkeypatch):
    pim = apply_path(models["f4"], "A->M->Y", "1", keep_all=True)
    fz = path_factorization(pim)
    ref = exact_joint(pim, fz).probs.copy()
    monkeypatch.setattr(infer, "BLOCK_SIZE", 7)
    assert np.array_equal(exact_joint(pim, fz).probs, ref)


def test_json_shapes(models):
    fz = pi_formula(models["f2"], "T->Y", "1")
    doc = factorization_to_json(fz)
    assert doc["factors"][0] == {
        "child": {"name": "Y", "world": "pi"},
        "given": [{"literal": "1"}, {"name": "Z", "world": "factual"}],
    }
    table = joint_to_json(path_effect_marginal(models["f2"], "T->Y", "1", ["Y"]))
    assert table == {"vars": [{"name": "Y", "world": "pi"}],
                     "rows": [{"values": ["0"], "p": 0.25}, {"values": ["1"], "p": 0.75}]}
    json.dumps(doc)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_factual_consistency(seed):
    rng = np.random.default_rng(seed)
    scm = random_scm(rng)
    path = random_path(rng, scm)
    model = scm_to_cpt(scm)
    pim = apply_path(model, path, model.domain(path[0]).values[-1])
    joint = exact_joint(pim, path_factorization(pim))
    factual = marginalize(joint, list(model.names))
    assert np.abs(factual.probs - model.joint()).max() <= 1e-12
    assert abs(joint.probs.sum() - 1.0) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_counterfactual_marginals_match_rewritten_system(seed):
    rng = np.random.default_rng(seed)
    scm = random_scm(rng)
    path = random_path(rng, scm)
    value = scm.domain(path[0]).values[int(rng.integers(len(scm.domain(path[0]))))]
    cols, arr = path_system_joint(scm, path, value)
    pim = apply_path(scm, path, value)
    joint = exact_joint(pim, path_factorization(pim))
    for k in pim.counterfactuals:
        got = marginalize(joint, [Node(k, PI)]).probs
        assert np.abs(got - marginal(cols, arr, (k, "pi"))).max() <= 1e-12


def test_fixture_oracle_uses_independent_noise_construction(models):
    scm = quantile_scm(models["f3"])
    cols, arr = path_system_joint(scm, ["X", "A", "Y"], "1")
    assert marginal(cols, arr, ("Y", "pi"))[1] == pytest.approx(0.71025, abs=1e-12)
