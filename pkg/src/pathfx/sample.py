"""Monte Carlo oracle: ancestral sampling and nested counterfactuals.

Draws are generated in blocks of 65536.  Block ``i`` uses its own PCG64
stream seeded by ``SeedSequence(seed, spawn_key=(i,))``, so a table depends
only on ``(model, n, seed)`` and never on how many workers produced it.

The path-intervention sampler works at CPT level: a counterfactual copy is
an independent draw from its CPT at substituted arguments.  The nested
sampler needs a full SCM, since every world shares one noise draw.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ColumnMismatch, InferenceError, RequiresScm, StateSpaceTooLarge
from .graph import CausalPath, Node, World, causal_diagram, validate_path
from .infer import (
    DEFAULT_MAX_STATES,
    JointTable,
    Literal,
    _as_cpt_model,
    node_to_json,
    observational_factorization,
    path_factorization,
    round12,
)
from .intervene import PathIntervenedModel
from .model import Domain, Scm

BLOCK_SIZE = 65536
RNG_ALGORITHM = "numpy.PCG64/SeedSequence(seed, spawn_key=(block,))"
_SEED_MASK = (1 << 64) - 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed & _SEED_MASK, spawn_key=(block,))))


@dataclass(frozen=True)
class EmpiricalTable:
    """Counts over the full product domain of ``columns`` from ``n`` draws."""

    columns: tuple[Node, ...]
    domains: tuple[Domain, ...]
    counts: np.ndarray
    n: int
    seed: int
    algorithm: str = RNG_ALGORITHM

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != tuple(len(d) for d in self.domains) or int(counts.sum()) != self.n:
            raise InferenceError("counts do not match columns or n")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def frequencies(self) -> JointTable:
        return JointTable(self.columns, self.domains, self.counts / self.n)

    def marginal(self, keep) -> "EmpiricalTable":
        keep = [Node(k) if isinstance(k, str) else k for k in keep]
        axes = [self.columns.index(k) for k in keep]
        drop = tuple(i for i in range(len(self.columns)) if i not in axes)
        summed = self.counts.sum(axis=drop) if drop else self.counts
        remaining = [i for i in range(len(self.columns)) if i in axes]
        counts = np.transpose(summed, [remaining.index(a) for a in axes])
        return EmpiricalTable(tuple(keep), tuple(self.domains[a] for a in axes), counts, self.n, self.seed, self.algorithm)

    def counts_by_values(self) -> dict[tuple[str, ...], int]:
        return {
            tuple(d.values[i] for d, i in zip(self.domains, idx)): int(self.counts[idx])
            for idx in np.ndindex(*self.counts.shape)
        }

    def to_json(self) -> dict:
        return {
            "vars": [node_to_json(c) for c in self.columns],
            "rows": [
                {"values": list(v), "count": c, "p": round12(c / self.n)}
                for v, c in self.counts_by_values().items()
            ],
            "n": self.n,
            "seed": self.seed,
            "rng": self.algorithm,
        }


def _run_blocks(draw, n: int, workers: int) -> np.ndarray:
    blocks = [(b, min(BLOCK_SIZE, n - b * BLOCK_SIZE)) for b in range(math.ceil(n / BLOCK_SIZE))]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda bm: draw(*bm), blocks))
    else:
        parts = [draw(b, m) for b, m in blocks]
    return sum(parts[1:], parts[0])


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``probs`` by inverse CDF."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])
    return np.minimum((cdf <= u[:, None]).sum(axis=1), probs.shape[1] - 1)


def _resolve(obj):
    if isinstance(obj, PathIntervenedModel):
        return obj.base, path_factorization(obj)
    model = _as_cpt_model(obj)
    return model, observational_factorization(model)


def sample_model(obj, n: int, seed: int, workers: int = 1, max_states: int = DEFAULT_MAX_STATES) -> EmpiricalTable:
    """``n`` ancestral draws from a model, a do/info result, or a path-intervened model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    model, fz = _resolve(obj)
    order = fz.order
    domains = tuple(model.domain(v.name) for v in order)
    shape = tuple(len(d) for d in domains)
    if math.prod(shape) > max_states:
        raise StateSpaceTooLarge(f"{math.prod(shape)} joint states exceed the cap of {max_states}")
    plan = []
    for node in order:
        f = fz.factor_of(node)
        cpt = model.cpt(node.name)
        refs = [
            (True, model.domain(p).index(g.value)) if isinstance(g, Literal) else (False, g)
            for g, p in zip(f.given, cpt.parents)
        ]
        plan.append((node, model.table(node.name), refs))

    def draw(block: int, m: int) -> np.ndarray:
        rng = block_rng(seed, block)
        values: dict[Node, np.ndarray] = {}
        for node, table, refs in plan:
            key = tuple(np.full(m, v) if lit else values[v] for lit, v in refs)
            rows = table[key] if key else np.broadcast_to(table, (m, table.shape[-1]))
            values[node] = _categorical(rng, rows)
        flat = np.ravel_multi_index(tuple(values[v] for v in order), shape) if order else np.zeros(m, dtype=int)
        return np.bincount(flat, minlength=math.prod(shape))

    counts = _run_blocks(draw, n, workers).reshape(shape)
    return EmpiricalTable(order, domains, counts, n, seed)


@dataclass(frozen=True)
class NestedSpec:
    """Head takes ``on_path_value`` along the path and ``off_path_value`` elsewhere."""

    path: CausalPath
    on_path_value: str
    off_path_value: str


def nested_counterfactual_sample(scm: Scm, spec: NestedSpec, n: int, seed: int, workers: int = 1) -> EmpiricalTable:
    """Sample ``Y(pi, a, a')`` by recursive substitution under shared noise.

    Per draw: every variable in the ``a'`` world is evaluated with the head
    fixed to ``a'``; along the path, each node reads its path predecessor's
    nested value and every other parent from the ``a'`` world; the head
    itself is ``a``.
    """
    if not isinstance(scm, Scm):
        raise RequiresScm("nested counterfactuals share noise across worlds and need a full SCM")
    if n < 1:
        raise ValueError("n must be at least 1")
    path = validate_path(causal_diagram(scm), spec.path.nodes)
    head_dom = scm.domain(path.head)
    a = head_dom.index(str(spec.on_path_value))
    a_off = head_dom.index(str(spec.off_path_value))
    order = scm.topological_order()
    tail_dom = scm.domain(path.tail)

    def draw(block: int, m: int) -> np.ndarray:
        rng = block_rng(seed, block)
        noise = {v: _categorical(rng, np.broadcast_to(scm.noise_probs(v), (m, len(scm.noise_of(v).domain)))) for v in order}
        off: dict[str, np.ndarray] = {}
        for v in order:
            if v == path.head:
                off[v] = np.full(m, a_off)
            else:
                key = tuple(off[p] for p in scm.parents(v)) + (noise[v],)
                off[v] = scm.mechanism_array(v)[key]
        nested = {path.head: np.full(m, a)}
        for prev, v in path.edges:
            key = tuple(nested[p] if p == prev else off[p] for p in scm.parents(v)) + (noise[v],)
            nested[v] = scm.mechanism_array(v)[key]
        return np.bincount(nested[path.tail], minlength=len(tail_dom))

    counts = _run_blocks(draw, n, workers)
    return EmpiricalTable((Node(path.tail, World.NESTED),), (tail_dom,), counts, n, seed)


Table = Union[JointTable, EmpiricalTable]


def _probs(t: Table) -> np.ndarray:
    return t.probs if isinstance(t, JointTable) else t.counts / t.n


def tv_distance(a: Table, b: Table) -> float:
    """Half the L1 distance over the common product domain."""
    if tuple(a.columns) != tuple(b.columns) or tuple(a.domains) != tuple(b.domains):
        raise ColumnMismatch(
            f"columns differ: {[str(c) for c in a.columns]} vs {[str(c) for c in b.columns]}"
        )
    return float(0.5 * np.abs(_probs(a) - _probs(b)).sum())
