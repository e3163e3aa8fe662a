"""Acceptance criteria 1-10, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the report lines are printed
to the terminal even when output capture is on.
"""

import json
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import FIXTURE_PATHS
from oracles import fuzz_sources, marginal, path_system_joint, quantile_scm, random_path, random_scm
from pathfx import fixtures
from pathfx.dsl import parse_model, serialize_model
from pathfx.graph import Node, World, causal_diagram, find_recanting_witness, validate_path
from pathfx.infer import (
    Literal,
    exact_joint,
    marginalize,
    observational_factorization,
    path_factorization,
    pi_formula,
)
from pathfx.intervene import apply_do, apply_info, apply_path
from pathfx.model import Scm, scm_to_cpt
from pathfx.sample import NestedSpec, nested_counterfactual_sample, sample_model, tv_distance

PI = World.PI
GENERATION_SEED = 20240501
SAMPLE_SEED = 12345
N = 200_000


@contextmanager
def criterion(report, number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        report(f"criterion {number:2d} FAIL  {title} ({time.perf_counter() - start:.2f} s): {exc}")
        raise
    report(f"criterion {number:2d} PASS  {title} ({time.perf_counter() - start:.2f} s)")


def signature(fz):
    def g(x):
        return f"{x.source.lower()}'" if isinstance(x, Literal) else str(x).lower()

    return sorted((str(f.child).lower(), tuple(sorted(g(x) for x in f.given))) for f in fz.factors)


F3_EXPECTED = sorted([
    ("y^pi", ("a^pi", "m")),
    ("a^pi", ("x'",)),
    ("y", ("a", "m")),
    ("m", ("a",)),
    ("a", ("x",)),
    ("x", ()),
])


def check_structure_f3():
    fz = pi_formula(fixtures.load("f3"), ["X", "A", "Y"], "1")
    assert signature(fz) == F3_EXPECTED, signature(fz)


def oracle_gap(model, path, value) -> float:
    """Largest gap between pi-formula and rewritten-system marginals over all counterfactuals."""
    scm = model if isinstance(model, Scm) else quantile_scm(model)
    cols, arr = path_system_joint(scm, path, value)
    pim = apply_path(model, path, value)
    joint = exact_joint(pim, path_factorization(pim))
    gap = 0.0
    for k in pim.counterfactuals:
        got = marginalize(joint, [Node(k, PI)]).probs
        gap = max(gap, float(np.abs(got - marginal(cols, arr, (k, "pi"))).max()))
    return gap


def test_c1_pi_formula_structure(report):
    with criterion(report, 1, "pi-formula factor multiset on F3, pi=[X,A,Y]"):
        start = time.perf_counter()
        check_structure_f3()
        assert time.perf_counter() - start < 1.0


def test_c2_oracle_equivalence(report):
    with criterion(report, 2, "pi-formula vs rewritten-system enumeration, F1-F4 + 100 random models, tol 1e-12"):
        start = time.perf_counter()
        worst = 0.0
        for name, path in FIXTURE_PATHS.items():
            model = fixtures.load(name)
            for value in model.domain(path[0]).values:
                worst = max(worst, oracle_gap(model, path, value))
        rng = np.random.default_rng(GENERATION_SEED)
        for _ in range(100):
            scm = random_scm(rng)
            path = random_path(rng, scm)
            dom = scm.domain(path[0]).values
            worst = max(worst, oracle_gap(scm, path, dom[int(rng.integers(len(dom)))]))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-12, f"max gap {worst:.3e}"
        assert elapsed < 60, f"{elapsed:.1f} s"


def test_c3_recanting_witness(report):
    with criterion(report, 3, "witness A on F3 and M on F4; identification still exact"):
        f3, f4 = fixtures.load("f3"), fixtures.load("f4")
        d3, d4 = causal_diagram(f3), causal_diagram(f4)
        assert find_recanting_witness(d3, validate_path(d3, "X->A->Y")) == "A"
        assert find_recanting_witness(d4, validate_path(d4, "A->M->Y")) == "M"
        check_structure_f3()
        for model, path in ((f3, ["X", "A", "Y"]), (f4, ["A", "M", "Y"])):
            for value in ("0", "1"):
                assert oracle_gap(model, path, value) <= 1e-12


def test_c4_adjustment(report):
    with criterion(report, 4, "F2 path effect equals backdoor adjustment 0.75 and the do(t') marginal"):
        model = fixtures.load("f2")
        pim = apply_path(model, ["T", "Y"], "1")
        p_path = marginalize(exact_joint(pim, path_factorization(pim)), [Node("Y", PI)]).prob({Node("Y", PI): "1"})
        table = model.cpt("Y").rows
        pz = model.cpt("Z").rows[()]
        adjust = sum(table[("1", z)][1] * pz[i] for i, z in enumerate(model.domain("Z").values))
        do, _ = apply_do(model, {"T": "1"})
        p_do = exact_joint(do, observational_factorization(do)).prob({"Y": "1"})
        assert abs(adjust - 0.75) <= 1e-12
        assert abs(p_path - adjust) <= 1e-12
        assert abs(p_path - p_do) <= 1e-12


def test_c5_off_path_equality(report):
    with criterion(report, 5, "keep_all: off-path copies equal their factual marginals, F1-F4"):
        for name, path in FIXTURE_PATHS.items():
            model = fixtures.load(name)
            pim = apply_path(model, path, "1", keep_all=True)
            joint = exact_joint(pim, path_factorization(pim))
            cols, arr = path_system_joint(quantile_scm(model), path, "1", keep_all=True)
            for v in model.names:
                if v in path[1:]:
                    continue
                cf = marginalize(joint, [Node(v, PI)]).probs
                assert np.abs(cf - marginalize(joint, [v]).probs).max() <= 1e-12, (name, v)
                assert np.abs(cf - marginal(cols, arr, (v, "pi"))).max() <= 1e-12, (name, v)


def info_do_gap(model, assignments) -> float:
    info, _ = apply_info(model, assignments)
    do, _ = apply_do(model, assignments)
    rest = [n for n in model.names if n not in assignments]
    if not rest:
        return 0.0
    a = marginalize(exact_joint(info, observational_factorization(info)), rest)
    b = marginalize(exact_joint(do, observational_factorization(do)), rest)
    return float(np.abs(a.probs - b.probs).max())


def test_c6_info_do_coincidence(report):
    with criterion(report, 6, "sigma(v') and do(v') agree on V minus I, F2 + 50 random models"):
        worst = info_do_gap(fixtures.load("f2"), {"T": "1"})
        rng = np.random.default_rng(GENERATION_SEED + 6)
        for _ in range(50):
            scm = random_scm(rng)
            size = int(rng.integers(1, len(scm.names) + 1))
            chosen = rng.choice(len(scm.names), size=size, replace=False)
            assignments = {}
            for i in sorted(chosen):
                dom = scm.domain(scm.names[i]).values
                assignments[scm.names[i]] = dom[int(rng.integers(len(dom)))]
            worst = max(worst, info_do_gap(scm, assignments))
        assert worst <= 1e-12, f"max gap {worst:.3e}"


@pytest.mark.parametrize("name", list(FIXTURE_PATHS))
def test_c7_monte_carlo(report, name):
    path = FIXTURE_PATHS[name]
    with criterion(report, 7, f"TV(empirical n=200000, exact) <= 0.01 on {name.upper()} pi={path}"):
        start = time.perf_counter()
        model = fixtures.load(name)
        pim = apply_path(model, path, "1")
        cols = [Node(k, PI) for k in pim.counterfactuals]
        exact = marginalize(exact_joint(pim, path_factorization(pim)), cols)
        emp = sample_model(pim, N, seed=SAMPLE_SEED).marginal(cols)
        tv = tv_distance(emp, exact)
        elapsed = time.perf_counter() - start
        assert tv <= 0.01, f"TV {tv:.4f}"
        assert elapsed < 10, f"{elapsed:.1f} s"


def test_c8_cross_world(report):
    with criterion(report, 8, "nested Y(pi,a,a') differs from Y^pi(a) unless A is degenerate"):
        scm = fixtures.load("f1_scm")
        path = validate_path(causal_diagram(scm), "A->M->Y")
        nested = nested_counterfactual_sample(scm, NestedSpec(path, "1", "0"), N, seed=SAMPLE_SEED)
        e_nested = nested.counts[1] / nested.n
        pim = apply_path(scm, path, "1")
        emp = sample_model(pim, N, seed=SAMPLE_SEED).marginal([Node("Y", PI)])
        e_path = emp.counts[1] / emp.n
        assert abs(e_nested - e_path) > 0.01, f"|{e_nested:.4f} - {e_path:.4f}|"

        degenerate = fixtures.load("f1_degenerate_scm")
        assert scm_to_cpt(degenerate).cpt("A").rows[()] == (0.0, 1.0)
        nested = nested_counterfactual_sample(degenerate, NestedSpec(path, "0", "1"), N, seed=SAMPLE_SEED)
        pim = apply_path(degenerate, path, "0")
        exact = marginalize(exact_joint(pim, path_factorization(pim)), [Node("Y", PI)])
        tv = tv_distance(nested.frequencies().relabeled(exact.columns), exact)
        assert tv <= 0.01, f"TV {tv:.4f}"


def test_c9_parser(report):
    with criterion(report, 9, "round-trip on all fixtures and 10000-case mutation fuzz"):
        start = time.perf_counter()
        sources = [fixtures.source(n) for n in fixtures.NAMES]
        for text in sources:
            mf = parse_model(text)
            assert parse_model(serialize_model(mf)) == mf
        ok, errs = fuzz_sources(sources, 10_000)
        elapsed = time.perf_counter() - start
        assert ok + errs == 10_000
        assert elapsed < 30, f"{elapsed:.1f} s"


F = {n: str(fixtures.path(n)) for n in fixtures.NAMES}
CLI_RUNS = [
    ["validate", F["f4"]],
    ["paths", F["f4"], "--from", "A", "--to", "Y"],
    ["witness", F["f3"], "--path", "X->A->Y"],
    ["diagram", F["f3"], "--path", "X->A->Y", "--value", "1", "--augmented"],
    ["diagram", F["f2"], "--info", "T=1"],
    ["infer", F["f3"], "--path", "X->A->Y", "--value", "1", "--target", "Y", "--format", "json"],
    ["infer", F["f4"], "--path", "A->M->Y", "--value", "0", "--keep-factual", "--format", "text"],
    ["infer", F["f2"], "--do", "T=1"],
    ["sample", F["f1"], "--path", "A->M->Y", "--value", "1", "--n", "200000", "--seed", "5"],
    ["sample", F["f1"], "--path", "A->M->Y", "--value", "1", "--n", "200000", "--seed", "5", "--workers", "4"],
    ["compare", F["f1_scm"], "--path", "A->M->Y", "--value", "1", "--nested", "1,0",
     "--n", "200000", "--seed", "7", "--workers", "4"],
]


def cli(argv) -> bytes:
    proc = subprocess.run([sys.executable, "-m", "pathfx.cli", *argv], capture_output=True, check=True)
    return proc.stdout


def test_c10_determinism(report):
    with criterion(report, 10, "repeated CLI runs give byte-identical stdout (incl. 4 workers)"):
        outputs = {}
        for argv in CLI_RUNS:
            first, second = cli(argv), cli(argv)
            assert first == second, argv
            outputs[tuple(argv)] = first
        serial = json.loads(outputs[tuple(CLI_RUNS[-3])])
        parallel = json.loads(outputs[tuple(CLI_RUNS[-2])])
        assert serial["result"] == parallel["result"]
