"""Symbolic factorizations and exact inference by enumeration.

Counterfactual factors reuse the child's CPT with substituted arguments:
the counterfactual copy draws from an independent copy of the noise, so
``p(v_k^pi | e^pi)`` is the factual conditional table read at ``e^pi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import InferenceError, NonNumericDomain, StateSpaceTooLarge, UnknownColumn
from .graph import CausalPath, Node, World
from .intervene import EdgeRule, IntervenedModel, PathIntervenedModel, apply_path
from .model import NORMALIZATION_TOL, CptModel, Domain, Model, Scm, scm_to_cpt

DEFAULT_MAX_STATES = 10**8
BLOCK_SIZE = 65536


class Literal(NamedTuple):
    """Constant conditioner; ``source`` names the parent whose channel carries it."""

    value: str
    source: str = ""

    def __str__(self) -> str:
        return f"{self.source.lower()}'={self.value}" if self.source else self.value


Conditioner = Union[Node, Literal]


@dataclass(frozen=True)
class Factor:
    """``p(child | given)`` with ``given`` aligned to the child's CPT parents."""

    child: Node
    given: tuple[Conditioner, ...]

    def __str__(self) -> str:
        def show(x):
            return str(x) if isinstance(x, Literal) else _lower(x)

        if not self.given:
            return f"p({_lower(self.child)})"
        return f"p({_lower(self.child)}|{','.join(show(g) for g in self.given)})"


def _lower(node: Node) -> str:
    return str(Node(node.name.lower(), node.world))


@dataclass(frozen=True)
class Factorization:
    factors: tuple[Factor, ...]
    order: tuple[Node, ...]

    def __post_init__(self):
        children = [f.child for f in self.factors]
        if sorted(children, key=Node.sort_key) != sorted(self.order, key=Node.sort_key):
            raise InferenceError("each ordered variable needs exactly one factor")
        pos = {n: i for i, n in enumerate(self.order)}
        for f in self.factors:
            for g in f.given:
                if isinstance(g, Node) and pos.get(g, math.inf) >= pos[f.child]:
                    raise InferenceError(f"{f}: conditioner {g} does not precede its child")

    def __str__(self) -> str:
        return "·".join(str(f) for f in self.factors)

    def factor_of(self, node: Node) -> Factor:
        for f in self.factors:
            if f.child == node:
                return f
        raise UnknownColumn(f"no factor for {node}")


def _as_cpt_model(model) -> CptModel:
    if isinstance(model, IntervenedModel):
        model = model.model
    elif isinstance(model, PathIntervenedModel):
        model = model.base
    return scm_to_cpt(model) if isinstance(model, Scm) else model


def observational_factorization(model: Model) -> Factorization:
    """One factual factor ``p(v_i | v_pa(i))`` per variable."""
    model = _as_cpt_model(model)
    order = tuple(Node(n) for n in model.topological_order())
    factors = tuple(Factor(n, tuple(Node(p) for p in model.parents(n.name))) for n in reversed(order))
    return Factorization(factors, order)


def path_factorization(pim: PathIntervenedModel) -> Factorization:
    """Factual block plus one substituted factor per counterfactual copy."""
    base = pim.base
    cf = []
    for k in pim.counterfactuals:
        given = []
        for j in base.parents(k):
            rule = pim.rule(j, k)
            if rule is EdgeRule.FACTUAL:
                given.append(Node(j))
            elif rule is EdgeRule.LITERAL:
                given.append(Literal(pim.value, j))
            else:
                given.append(Node(j, World.PI))
        cf.append(Factor(Node(k, World.PI), tuple(given)))
    factual = observational_factorization(base)
    return Factorization(tuple(reversed(cf)) + factual.factors, pim.node_order())


def pi_formula(model: Model, path, value: str, keep_all: bool = False) -> Factorization:
    """Identifying factorization of the factual and path-counterfactual joint."""
    return path_factorization(apply_path(model, path, value, keep_all=keep_all))


# -- joint tables -------------------------------------------------------------


@dataclass(frozen=True)
class JointTable:
    """Probability array over the full product domain of ``columns``.

    Axis ``i`` of ``probs`` indexes ``domains[i]``.  Row iteration is
    odometer order with the last column varying fastest.
    """

    columns: tuple[Node, ...]
    domains: tuple[Domain, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "domains", tuple(self.domains))
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != tuple(len(d) for d in self.domains):
            raise InferenceError("probability array does not match the column domains")
        if len(set(self.columns)) != len(self.columns):
            raise InferenceError("duplicate columns")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise InferenceError("joint table is not a probability distribution")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def rows(self):
        for idx in np.ndindex(*self.probs.shape):
            yield tuple(d.values[i] for d, i in zip(self.domains, idx)), float(self.probs[idx])

    def column(self, node: Node | str) -> int:
        if isinstance(node, str):
            node = Node(node)
        try:
            return self.columns.index(node)
        except ValueError:
            raise UnknownColumn(f"no column {node}") from None

    def prob(self, assignment: dict) -> float:
        """Marginal probability of a partial assignment ``{column: value}``."""
        keep = [Node(k) if isinstance(k, str) else k for k in assignment]
        m = marginalize(self, keep)
        idx = tuple(d.index(str(assignment[k])) for k, d in zip(assignment, m.domains))
        return float(m.probs[idx])

    def relabeled(self, columns: Sequence[Node]) -> "JointTable":
        return JointTable(tuple(columns), self.domains, self.probs)


def exact_joint(model, factorization: Factorization, max_states: int = DEFAULT_MAX_STATES) -> JointTable:
    """Enumerate every assignment of the factorization's variables.

    Assignments are processed in fixed blocks of 65536; each row's
    probability is the product of its factors in factorization order.
    """
    model = _as_cpt_model(model)
    order = factorization.order
    domains = tuple(model.domain(n.name) for n in order)
    shape = tuple(len(d) for d in domains)
    total = math.prod(shape)
    if total > max_states:
        raise StateSpaceTooLarge(f"{total} joint states exceed the cap of {max_states}")
    col = {n: i for i, n in enumerate(order)}
    plan = []
    for f in factorization.factors:
        cpt = model.cpt(f.child.name)
        if len(f.given) != len(cpt.parents):
            raise InferenceError(f"{f}: expected {len(cpt.parents)} conditioners")
        refs = []
        for g, parent in zip(f.given, cpt.parents):
            if isinstance(g, Literal):
                refs.append((True, model.domain(parent).index(g.value)))
            elif g.name != parent:
                raise InferenceError(f"{f}: conditioner {g} stands where {parent} belongs")
            else:
                refs.append((False, col[g]))
        plan.append((model.table(f.child.name), refs, col[f.child]))
    out = np.empty(total)
    for start in range(0, total, BLOCK_SIZE):
        stop = min(start + BLOCK_SIZE, total)
        digits = np.unravel_index(np.arange(start, stop), shape)
        p = np.ones(stop - start)
        for table, refs, child in plan:
            key = tuple(v if lit else digits[v] for lit, v in refs) + (digits[child],)
            p *= table[key]
        out[start:stop] = p
    return JointTable(order, domains, out.reshape(shape))


def marginalize(joint: JointTable, keep: Sequence[Node | str]) -> JointTable:
    """Sum out every column not in ``keep``; result columns follow ``keep``'s order."""
    keep = [Node(k) if isinstance(k, str) else k for k in keep]
    axes = [joint.column(k) for k in keep]
    if len(set(axes)) != len(axes):
        raise UnknownColumn("duplicate column in keep list")
    drop = tuple(i for i in range(len(joint.columns)) if i not in axes)
    summed = joint.probs.sum(axis=drop) if drop else joint.probs
    remaining = [i for i in range(len(joint.columns)) if i in axes]
    perm = [remaining.index(a) for a in axes]
    probs = np.transpose(summed, perm) if perm else np.asarray(summed)
    return JointTable(tuple(keep), tuple(joint.domains[a] for a in axes), probs)


def _numeric(domain: Domain, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in domain.values])
    except ValueError:
        raise NonNumericDomain(f"domain of {name} has non-numeric labels {domain.values}") from None


def expectation(joint: JointTable, column: Node | str) -> float:
    m = marginalize(joint, [column])
    return float(np.dot(m.probs, _numeric(m.domains[0], str(m.columns[0]))))


def path_effect_marginal(model: Model, path, value: str, targets: Sequence[str], max_states: int = DEFAULT_MAX_STATES) -> JointTable:
    """Exact law of the path-intervened copies of ``targets``.

    Targets off the path's descendants are returned factually, which they
    equal in distribution.
    """
    pim = apply_path(model, path, value)
    joint = exact_joint(pim.base, path_factorization(pim), max_states=max_states)
    cols = [Node(t, World.PI) if t in pim.counterfactuals else Node(t) for t in targets]
    return marginalize(joint, cols)


def expectation_contrast(model: Model, path, value_a: str, value_b: str, target: str, max_states: int = DEFAULT_MAX_STATES) -> float:
    """E[target^{pi(a)}] - E[target^{pi(b)}] from two exact marginals."""
    cpt_model = _as_cpt_model(model)
    values = _numeric(cpt_model.domain(target), target)
    if str(value_a) == str(value_b):
        return 0.0
    ea = float(np.dot(path_effect_marginal(cpt_model, path, value_a, [target], max_states).probs, values))
    eb = float(np.dot(path_effect_marginal(cpt_model, path, value_b, [target], max_states).probs, values))
    return ea - eb


# -- JSON ---------------------------------------------------------------------


def round12(p: float) -> float:
    return float(format(float(p), ".12g"))


def node_to_json(node: Node) -> dict:
    return {"name": node.name, "world": node.world.value}


def factorization_to_json(fz: Factorization) -> dict:
    def given(g):
        return {"literal": g.value} if isinstance(g, Literal) else node_to_json(g)

    return {
        "factors": [{"child": node_to_json(f.child), "given": [given(g) for g in f.given]} for f in fz.factors],
        "order": [node_to_json(n) for n in fz.order],
        "text": str(fz),
    }


def joint_to_json(joint: JointTable) -> dict:
    return {
        "vars": [node_to_json(c) for c in joint.columns],
        "rows": [{"values": list(v), "p": round12(p)} for v, p in joint.rows()],
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False)


__all__ = [
    "Literal",
    "Factor",
    "Factorization",
    "JointTable",
    "observational_factorization",
    "path_factorization",
    "pi_formula",
    "exact_joint",
    "marginalize",
    "expectation",
    "expectation_contrast",
    "path_effect_marginal",
    "factorization_to_json",
    "joint_to_json",
    "CausalPath",
]
