"""Do, info and path interventions as explicit rewrites of model mechanisms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence, Union

from .errors import UnknownVariable
from .graph import CausalPath, Diagram, Node, World, causal_diagram, desc_pi, validate_path
from .model import (
    Cpt,
    CptModel,
    Mechanism,
    Model,
    Scm,
    decompose,
    recompose,
    scm_to_cpt,
)


def _check_assignments(model: Model, assignments: Mapping[str, str]) -> dict[str, str]:
    out = {}
    for name, value in assignments.items():
        if name not in model.names:
            raise UnknownVariable(f"unknown variable {name!r}", name)
        model.domain(name).index(str(value))
        out[name] = str(value)
    return out


@dataclass(frozen=True)
class DoIntervention:
    assignments: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "assignments", MappingProxyType(dict(self.assignments)))

    def describe(self) -> str:
        return "do(" + ", ".join(f"{k}={v}" for k, v in sorted(self.assignments.items())) + ")"


@dataclass(frozen=True)
class InfoIntervention:
    assignments: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "assignments", MappingProxyType(dict(self.assignments)))

    def describe(self) -> str:
        return "sigma(" + ", ".join(f"{k}={v}" for k, v in sorted(self.assignments.items())) + ")"


@dataclass(frozen=True)
class PathIntervention:
    path: CausalPath
    value: str

    def describe(self) -> str:
        return f"pi({self.path.head}={self.value}) along {self.path}"


@dataclass(frozen=True)
class IntervenedModel:
    """Result of a do or info intervention: the rewritten model plus provenance."""

    base: Model
    model: Model
    intervention: Union[DoIntervention, InfoIntervention]


class EdgeRule(str, Enum):
    FACTUAL = "factual-copy"
    LITERAL = "literal"
    COUNTERFACTUAL = "counterfactual-copy"


def edge_rule(path: CausalPath, parent: str, child: str) -> EdgeRule:
    """What a counterfactual copy of ``child`` reads from ``parent``."""
    if (parent, child) not in path.edges:
        return EdgeRule.FACTUAL
    if parent == path.head:
        return EdgeRule.LITERAL
    return EdgeRule.COUNTERFACTUAL


@dataclass(frozen=True)
class PathIntervenedModel:
    """Factual model plus counterfactual copies fed along the path.

    ``counterfactuals`` lists the copied variables in topological order;
    ``rules[(j, k)]`` says what the copy of ``k`` reads from parent ``j``.
    """

    base: CptModel
    path: CausalPath
    value: str
    counterfactuals: tuple[str, ...]
    rules: Mapping[tuple[str, str], EdgeRule]
    keep_all: bool = False

    def rule(self, parent: str, child: str) -> EdgeRule:
        return self.rules[(parent, child)]

    def node_order(self) -> tuple[Node, ...]:
        factual = tuple(Node(n) for n in self.base.topological_order())
        return factual + tuple(Node(n, World.PI) for n in self.counterfactuals)

    def describe(self) -> str:
        return PathIntervention(self.path, self.value).describe()


# -- do / info ---------------------------------------------------------------


def _point_mass(model: Model, name: str, value: str):
    if isinstance(model, Scm):
        noise = model.noise_of(name)
        return Mechanism(name, (), noise.name, {((), u): value for u in noise.domain})
    dom = model.domain(name)
    return Cpt(name, (), [1.0 if v == value else 0.0 for v in dom])


def _fix_cpt_parent(cpt: Cpt, parent: str, value: str) -> Cpt:
    pos = cpt.parents.index(parent)
    rows = {k[:pos] + k[pos + 1:]: p for k, p in cpt.rows.items() if k[pos] == value}
    return Cpt(cpt.child, cpt.parents[:pos] + cpt.parents[pos + 1:], rows)


def apply_do(model: Model, intervention) -> tuple[IntervenedModel, Diagram]:
    """Replace each intervened variable's mechanism (or CPT) by a point mass."""
    if not isinstance(intervention, DoIntervention):
        intervention = DoIntervention(intervention)
    fixed = _check_assignments(model, intervention.assignments)
    if isinstance(model, Scm):
        mechs = tuple(
            _point_mass(model, n, fixed[n]) if n in fixed else model.mechanism(n) for n in model.names
        )
        new = Scm(model.variables, model.noises, mechs)
    else:
        cpts = tuple(_point_mass(model, n, fixed[n]) if n in fixed else model.cpt(n) for n in model.names)
        new = CptModel(model.variables, cpts)
    result = IntervenedModel(model, new, intervention)
    return result, intervention_diagram(result)


def apply_info(model: Model, intervention) -> tuple[IntervenedModel, Diagram]:
    """Every child of an intervened variable reads the literal value on that edge."""
    if not isinstance(intervention, InfoIntervention):
        intervention = InfoIntervention(intervention)
    fixed = _check_assignments(model, intervention.assignments)
    if isinstance(model, Scm):
        dec = decompose(model)
        for j, value in fixed.items():
            for c in model.children(j):
                dec = dec.with_literal(j, c, value)
        new = recompose(dec)
    else:
        cpts = []
        for n in model.names:
            cpt = model.cpt(n)
            for j in model.parents(n):
                if j in fixed:
                    cpt = _fix_cpt_parent(cpt, j, fixed[j])
            cpts.append(cpt)
        new = CptModel(model.variables, tuple(cpts))
    result = IntervenedModel(model, new, intervention)
    return result, intervention_diagram(result)


# -- path --------------------------------------------------------------------


def apply_path(model: Model, intervention, value: str | None = None, keep_all: bool = False) -> PathIntervenedModel:
    """Path intervention: counterfactual copies of the path's descendants.

    ``intervention`` is a :class:`PathIntervention`, or a path (``CausalPath``,
    node list or ``"A->M->Y"``) together with ``value``.  Without
    ``keep_all`` only the copies that the path actually feeds are kept; the
    others equal their factual twins in distribution.
    """
    cpt_model = scm_to_cpt(model) if isinstance(model, Scm) else model
    if isinstance(intervention, PathIntervention):
        path, value = intervention.path, intervention.value
    else:
        path = intervention
    dag = causal_diagram(cpt_model)
    path = validate_path(dag, path.nodes if isinstance(path, CausalPath) else path)
    value = str(value)
    cpt_model.domain(path.head).index(value)
    copied = set(desc_pi(path)) if not keep_all else set(cpt_model.names)
    order = tuple(n for n in cpt_model.topological_order() if n in copied)
    rules = {(j, k): edge_rule(path, j, k) for k in order for j in cpt_model.parents(k)}
    return PathIntervenedModel(cpt_model, path, value, order, MappingProxyType(rules), keep_all)


# -- diagrams ----------------------------------------------------------------


def _path_diagram(pim: PathIntervenedModel, augmented: bool) -> Diagram:
    base = pim.base
    nodes = [Node(n) for n in base.names]
    edges = {(Node(j), Node(i)) for j, i in base.edges()}
    marked = {(Node(j), Node(i)) for j, i in pim.path.edges}
    notes = []
    for k in pim.counterfactuals:
        ck = Node(k, World.PI)
        nodes.append(ck)
        for j in base.parents(k):
            rule = pim.rule(j, k)
            if rule is EdgeRule.FACTUAL:
                edges.add((Node(j), ck))
            elif rule is EdgeRule.COUNTERFACTUAL:
                e = (Node(j, World.PI), ck)
                edges.add(e)
                marked.add(e)
            else:
                notes.append((ck, f"{j.lower()}={pim.value}"))
        if augmented:
            u = Node(k, World.EXOGENOUS_COPY)
            nodes.append(u)
            edges.add((u, ck))
    if augmented:
        for n in base.names:
            nodes.append(Node(n, World.EXOGENOUS))
            edges.add((Node(n, World.EXOGENOUS), Node(n)))
    return Diagram(tuple(nodes), frozenset(edges), frozenset(marked), tuple(notes))


def intervention_diagram(intervened, augmented: bool = False) -> Diagram:
    """Causal diagram of the rewritten mechanisms.

    do/info interventions keep a single world; literal inputs appear as node
    annotations rather than nodes.  ``augmented`` adds exogenous parents.
    """
    if isinstance(intervened, PathIntervenedModel):
        return _path_diagram(intervened, augmented)
    model = intervened.model
    nodes = [Node(n) for n in model.names]
    edges = {(Node(j), Node(i)) for j, i in model.edges()}
    notes = []
    fixed = intervened.intervention.assignments
    if isinstance(intervened.intervention, DoIntervention):
        notes = [(Node(n), f"{n.lower()}={v}") for n, v in fixed.items()]
    else:
        for j, v in fixed.items():
            for c in intervened.base.children(j):
                notes.append((Node(c), f"{j.lower()}={v}"))
    if augmented:
        for n in model.names:
            if isinstance(intervened.intervention, DoIntervention) and n in fixed:
                continue
            nodes.append(Node(n, World.EXOGENOUS))
            edges.add((Node(n, World.EXOGENOUS), Node(n)))
    return Diagram(tuple(nodes), frozenset(edges), frozenset(), tuple(notes))


def off_path_variables(pim: PathIntervenedModel) -> tuple[str, ...]:
    """Variables whose counterfactual copy the path never feeds."""
    fed = set(desc_pi(pim.path))
    return tuple(n for n in pim.base.topological_order() if n not in fed)


def validate_intervened(pim: PathIntervenedModel) -> None:
    """Assert the rule table is an exhaustive, exclusive case split."""
    for k in pim.counterfactuals:
        for j in pim.base.parents(k):
            rule = pim.rules[(j, k)]
            on_path = (j, k) in pim.path.edges
            assert (rule is EdgeRule.LITERAL) == (on_path and j == pim.path.head)
            assert (rule is EdgeRule.COUNTERFACTUAL) == (on_path and j != pim.path.head)
            assert (rule is EdgeRule.FACTUAL) == (not on_path)
    assert len(pim.rules) == sum(len(pim.base.parents(k)) for k in pim.counterfactuals)


__all__: Sequence[str] = [
    "DoIntervention",
    "InfoIntervention",
    "PathIntervention",
    "IntervenedModel",
    "PathIntervenedModel",
    "EdgeRule",
    "edge_rule",
    "apply_do",
    "apply_info",
    "apply_path",
    "intervention_diagram",
    "off_path_variables",
    "validate_intervened",
]
