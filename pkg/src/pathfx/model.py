"""Finite discrete structural causal models and CPT models.

Two model kinds share one structural surface (``names``, ``domain``,
``parents``, ``children``, ``edges``, ``topological_order``):

* :class:`Scm` holds deterministic mechanism tables plus one independent
  finite noise per endogenous variable (Markovian).
* :class:`CptModel` holds one conditional probability table per variable.

Both are immutable and validated on construction.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateName,
    IncompleteMechanismTable,
    MissingCpt,
    MissingMechanism,
    ModelError,
    RowNotNormalized,
    StateSpaceTooLarge,
    UnknownVariable,
    ValueOutOfDomain,
)

NORMALIZATION_TOL = 1e-9


def _fmt_tuple(values: Sequence[str]) -> str:
    return "(" + ",".join(values) + ")"


@dataclass(frozen=True)
class Domain:
    """Ordered, duplicate-free set of symbolic value labels."""

    values: tuple[str, ...]

    def __post_init__(self):
        values = tuple(str(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ModelError("a domain needs at least one value")
        seen = set()
        for v in values:
            if v in seen:
                raise DuplicateName(f"duplicate domain value {v!r}")
            seen.add(v)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, value) -> bool:
        return value in self.values

    def index(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise ValueOutOfDomain(
                f"value {value!r} not in domain {{{', '.join(self.values)}}}"
            ) from None


def _as_domain(values) -> Domain:
    return values if isinstance(values, Domain) else Domain(tuple(values))


@dataclass(frozen=True)
class VariableSpec:
    name: str
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "domain", _as_domain(self.domain))


def _check_distribution(probs: Sequence[float], size: int, where: str, variable: str | None):
    if len(probs) != size:
        raise ModelError(
            f"{where}: expected {size} probabilities, got {len(probs)}", variable
        )
    for p in probs:
        if not math.isfinite(p) or p < 0:
            raise RowNotNormalized(f"{where}: invalid probability {p!r}", variable)
    total = math.fsum(probs)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise RowNotNormalized(f"{where}: probabilities sum to {total!r}, not 1", variable)


@dataclass(frozen=True)
class NoiseSpec:
    name: str
    domain: Domain
    dist: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", _as_domain(self.domain))
        object.__setattr__(self, "dist", tuple(float(p) for p in self.dist))
        _check_distribution(self.dist, len(self.domain), f"noise {self.name}", None)


def _tuple_key(key) -> tuple[str, ...]:
    if isinstance(key, tuple):
        return tuple(str(k) for k in key)
    return (str(key),)


@dataclass(frozen=True)
class Mechanism:
    """Tabular structural equation ``child <- f(parents, noise)``.

    ``table`` maps ``(parent_values, noise_value)`` to a child value.
    """

    child: str
    parents: tuple[str, ...]
    noise: str
    table: Mapping[tuple[tuple[str, ...], str], str]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        table = {(_tuple_key(pa), str(u)): str(v) for (pa, u), v in dict(self.table).items()}
        object.__setattr__(self, "table", MappingProxyType(table))

    def __call__(self, parent_values: Sequence[str], noise_value: str) -> str:
        return self.table[(tuple(parent_values), noise_value)]


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table ``p(child | parents)``.

    ``rows`` maps a parent-value tuple to a probability vector over the child
    domain.  A bare probability list is accepted for parentless variables.
    """

    child: str
    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], tuple[float, ...]]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        rows = self.rows
        if not isinstance(rows, Mapping):
            rows = {(): rows}
        rows = {_tuple_key(k) if k != () else (): tuple(float(p) for p in v) for k, v in rows.items()}
        object.__setattr__(self, "rows", MappingProxyType(rows))


def _find_cycle(names: Sequence[str], parents: Mapping[str, Sequence[str]]) -> list[str]:
    color = {n: 0 for n in names}
    stack: list[str] = []

    def visit(n):
        color[n] = 1
        stack.append(n)
        for p in sorted(parents[n]):
            if color[p] == 1:
                return stack[stack.index(p):] + [p]
            if color[p] == 0:
                found = visit(p)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in sorted(names):
        if color[n] == 0:
            found = visit(n)
            if found:
                # found lists parent-before-child in reverse; flip to causal order
                return list(reversed(found))
    return []


def topological_sort(names: Iterable[str], parents: Mapping[str, Sequence[str]]) -> tuple[str, ...]:
    """Lexicographically smallest topological order; raises on cycles."""
    names = list(names)
    indeg = {n: len(set(parents[n])) for n in names}
    children: dict[str, list[str]] = {n: [] for n in names}
    for n in names:
        for p in set(parents[n]):
            children[p].append(n)
    heap = [n for n in names if indeg[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(names):
        raise CycleDetected(_find_cycle(names, parents))
    return tuple(order)


class _Structure:
    """Graph accessors shared by :class:`Scm` and :class:`CptModel`."""

    variables: tuple[VariableSpec, ...]
    _parents: Mapping[str, tuple[str, ...]]

    def _init_structure(self, parents: dict[str, tuple[str, ...]]):
        names = tuple(v.name for v in self.variables)
        seen = set()
        for n in names:
            if n in seen:
                raise DuplicateName(f"variable {n!r} declared twice", n)
            seen.add(n)
        domains = {v.name: v.domain for v in self.variables}
        for child, pa in parents.items():
            for p in pa:
                if p not in domains:
                    raise UnknownVariable(f"{child}: unknown parent {p!r}", child)
            if len(set(pa)) != len(pa):
                raise DuplicateName(f"{child}: repeated parent", child)
        order = topological_sort(names, parents)
        children = {n: tuple(sorted(c for c in names if n in parents[c])) for n in names}
        object.__setattr__(self, "_names", names)
        object.__setattr__(self, "_domains", MappingProxyType(domains))
        object.__setattr__(self, "_parents", MappingProxyType(dict(parents)))
        object.__setattr__(self, "_children", MappingProxyType(children))
        object.__setattr__(self, "_order", order)

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def domain(self, name: str) -> Domain:
        try:
            return self._domains[name]
        except KeyError:
            raise UnknownVariable(f"unknown variable {name!r}", name) from None

    def parents(self, name: str) -> tuple[str, ...]:
        self.domain(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        self.domain(name)
        return self._children[name]

    def edges(self) -> frozenset[tuple[str, str]]:
        return frozenset((p, c) for c in self._names for p in self._parents[c])

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def _parent_rows(self, name: str):
        """All parent-value tuples of ``name`` in domain (odometer) order."""
        return itertools.product(*(self.domain(p).values for p in self.parents(name)))


@dataclass(frozen=True, eq=True)
class CptModel(_Structure):
    """DAG plus one conditional probability table per variable."""

    variables: tuple[VariableSpec, ...]
    cpts: tuple[Cpt, ...]
    _tables: Mapping[str, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpts", tuple(self.cpts))
        by_child: dict[str, Cpt] = {}
        known = {v.name for v in self.variables}
        for cpt in self.cpts:
            if cpt.child not in known:
                raise UnknownVariable(f"CPT for undeclared variable {cpt.child!r}", cpt.child)
            if cpt.child in by_child:
                raise DuplicateName(f"two CPTs for {cpt.child!r}", cpt.child)
            by_child[cpt.child] = cpt
        for v in self.variables:
            if v.name not in by_child:
                raise MissingCpt(f"no CPT for variable {v.name!r}", v.name)
        self._init_structure({v.name: by_child[v.name].parents for v in self.variables})
        object.__setattr__(self, "_by_child", MappingProxyType(by_child))
        tables = {}
        for v in self.variables:
            cpt = by_child[v.name]
            shape = tuple(len(self.domain(p)) for p in cpt.parents) + (len(v.domain),)
            arr = np.zeros(shape)
            for key in cpt.rows:
                if len(key) != len(cpt.parents):
                    raise ModelError(
                        f"CPT {v.name}: row {_fmt_tuple(key)} has {len(key)} values "
                        f"for {len(cpt.parents)} parents",
                        v.name,
                    )
                for p, val in zip(cpt.parents, key):
                    if val not in self.domain(p):
                        raise ValueOutOfDomain(
                            f"CPT {v.name}: row {_fmt_tuple(key)}: {val!r} not in domain of {p}",
                            v.name,
                        )
            for idx, key in enumerate(self._parent_rows(v.name)):
                if key not in cpt.rows:
                    raise MissingCpt(f"CPT {v.name}: missing row {_fmt_tuple(key)}", v.name)
                probs = cpt.rows[key]
                _check_distribution(probs, len(v.domain), f"CPT {v.name} row {_fmt_tuple(key)}", v.name)
                arr[np.unravel_index(idx, shape[:-1]) if shape[:-1] else ()] = probs
            arr.setflags(write=False)
            tables[v.name] = arr
        object.__setattr__(self, "_tables", MappingProxyType(tables))

    def cpt(self, name: str) -> Cpt:
        self.domain(name)
        return self._by_child[name]

    def table(self, name: str) -> np.ndarray:
        """CPT as an array of shape ``(*parent sizes, child size)``."""
        self.domain(name)
        return self._tables[name]

    def joint(self) -> np.ndarray:
        """Observational joint as an array indexed in ``names`` order."""
        shape = tuple(len(v.domain) for v in self.variables)
        out = np.ones(shape)
        axis = {n: i for i, n in enumerate(self.names)}
        for n in self.topological_order():
            axes = [axis[p] for p in self.parents(n)] + [axis[n]]
            out = out * _expand(self.table(n), axes, shape)
        return out


def _expand(table: np.ndarray, axes: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    order = np.argsort(axes)
    t = np.transpose(table, order)
    sorted_axes = [axes[i] for i in order]
    view = [1] * len(shape)
    for a in sorted_axes:
        view[a] = shape[a]
    return t.reshape(view)


@dataclass(frozen=True, eq=True)
class Scm(_Structure):
    """Markovian SCM with tabular mechanisms and finite independent noises."""

    variables: tuple[VariableSpec, ...]
    noises: tuple[NoiseSpec, ...]
    mechanisms: tuple[Mechanism, ...]
    _arrays: Mapping[str, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "noises", tuple(self.noises))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        var_names = {v.name for v in self.variables}
        noises: dict[str, NoiseSpec] = {}
        for u in self.noises:
            if u.name in noises or u.name in var_names:
                raise DuplicateName(f"noise name {u.name!r} is not unique", u.name)
            noises[u.name] = u
        by_child: dict[str, Mechanism] = {}
        noise_owner: dict[str, str] = {}
        for m in self.mechanisms:
            if m.child not in var_names:
                raise UnknownVariable(f"mechanism for undeclared variable {m.child!r}", m.child)
            if m.child in by_child:
                raise DuplicateName(f"two mechanisms for {m.child!r}", m.child)
            if m.noise not in noises:
                raise UnknownVariable(f"{m.child}: unknown noise {m.noise!r}", m.child)
            if m.noise in noise_owner:
                raise ModelError(
                    f"noise {m.noise!r} shared by {noise_owner[m.noise]} and {m.child}; "
                    "noises must be independent per variable",
                    m.child,
                )
            noise_owner[m.noise] = m.child
            by_child[m.child] = m
        for v in self.variables:
            if v.name not in by_child:
                raise MissingMechanism(f"no mechanism for variable {v.name!r}", v.name)
        for u in noises:
            if u not in noise_owner:
                raise ModelError(f"noise {u!r} is not used by any mechanism", None)
        self._init_structure({v.name: by_child[v.name].parents for v in self.variables})
        object.__setattr__(self, "_by_child", MappingProxyType(by_child))
        object.__setattr__(self, "_noises", MappingProxyType(noises))
        arrays = {}
        for v in self.variables:
            m = by_child[v.name]
            u = noises[m.noise]
            for (pa, uv), out in m.table.items():
                if len(pa) != len(m.parents):
                    raise ModelError(f"mechanism {v.name}: wrong arity in {_fmt_tuple(pa)}", v.name)
                for p, val in zip(m.parents, pa):
                    if val not in self.domain(p):
                        raise ValueOutOfDomain(
                            f"mechanism {v.name}: {val!r} not in domain of {p}", v.name
                        )
                if uv not in u.domain:
                    raise ValueOutOfDomain(f"mechanism {v.name}: {uv!r} not in domain of {u.name}", v.name)
                if out not in v.domain:
                    raise ValueOutOfDomain(
                        f"mechanism {v.name}: output {out!r} not in domain of {v.name}", v.name
                    )
            shape = tuple(len(self.domain(p)) for p in m.parents) + (len(u.domain),)
            arr = np.zeros(shape, dtype=np.int64)
            for idx, key in enumerate(itertools.product(*(self.domain(p).values for p in m.parents), u.domain.values)):
                pa, uv = key[:-1], key[-1]
                if (pa, uv) not in m.table:
                    raise IncompleteMechanismTable(
                        f"mechanism {v.name}: no entry for input ({','.join(pa)};{uv})", v.name
                    )
                arr[np.unravel_index(idx, shape)] = v.domain.index(m.table[(pa, uv)])
            arr.setflags(write=False)
            arrays[v.name] = arr
        object.__setattr__(self, "_arrays", MappingProxyType(arrays))

    def mechanism(self, name: str) -> Mechanism:
        self.domain(name)
        return self._by_child[name]

    def noise_of(self, name: str) -> NoiseSpec:
        return self._noises[self.mechanism(name).noise]

    def mechanism_array(self, name: str) -> np.ndarray:
        """Child value indices, shape ``(*parent sizes, noise size)``."""
        self.domain(name)
        return self._arrays[name]

    def noise_probs(self, name: str) -> np.ndarray:
        return np.asarray(self.noise_of(name).dist)

    def joint(self, max_states: int = 10**7) -> np.ndarray:
        """Observational joint by exhaustive enumeration of the noise space."""
        sizes = [len(self.noise_of(n).domain) for n in self.names]
        total = math.prod(sizes)
        if total > max_states:
            raise StateSpaceTooLarge(f"{total} noise configurations exceed cap {max_states}")
        grid = np.indices(sizes).reshape(len(sizes), -1)
        weight = np.ones(grid.shape[1])
        for i, n in enumerate(self.names):
            weight = weight * self.noise_probs(n)[grid[i]]
        noise = dict(zip(self.names, grid))
        values = {}
        for n in self.topological_order():
            idx = tuple(values[p] for p in self.parents(n)) + (noise[n],)
            values[n] = self.mechanism_array(n)[idx]
        shape = tuple(len(self.domain(n)) for n in self.names)
        flat = np.ravel_multi_index(tuple(values[n] for n in self.names), shape) if shape else np.zeros(grid.shape[1], dtype=int)
        return np.bincount(flat, weights=weight, minlength=math.prod(shape)).reshape(shape)


Model = Union[Scm, CptModel]


def _variable_specs(variables) -> list[VariableSpec]:
    if isinstance(variables, Mapping):
        return [VariableSpec(n, _as_domain(vals)) for n, vals in variables.items()]
    return [v if isinstance(v, VariableSpec) else VariableSpec(v[0], _as_domain(v[1])) for v in variables]


def build_cpt_model(variables, cpts: Iterable[Cpt]) -> CptModel:
    """Validated :class:`CptModel`.

    ``variables`` is a sequence of :class:`VariableSpec` or a mapping from
    name to domain values.
    """
    return CptModel(tuple(_variable_specs(variables)), tuple(cpts))


def build_scm(variables, noises: Iterable[NoiseSpec], mechanisms: Iterable[Mechanism]) -> Scm:
    return Scm(tuple(_variable_specs(variables)), tuple(noises), tuple(mechanisms))


def scm_to_cpt(scm: Scm) -> CptModel:
    """Marginalize the noise out of each mechanism: p(v|pa) = sum_u 1[f(pa,u)=v] P(u)."""
    if isinstance(scm, CptModel):
        return scm
    cpts = []
    for v in scm.variables:
        m = scm.mechanism(v.name)
        u = scm.noise_of(v.name)
        rows = {}
        for pa in scm._parent_rows(v.name):
            acc = [0.0] * len(v.domain)
            for uv, pu in zip(u.domain.values, u.dist):
                acc[v.domain.index(m.table[(pa, uv)])] += pu
            rows[pa] = tuple(acc)
        cpts.append(Cpt(v.name, m.parents, rows))
    return CptModel(scm.variables, tuple(cpts))


def cpt_to_scm(model: CptModel) -> Scm:
    """Canonical SCM reproducing ``model``'s CPTs exactly.

    Each noise is a uniform quantile cut into the cells between the union of
    all rows' cumulative breakpoints; the mechanism returns the child value
    whose CDF bin contains the cell.
    """
    if isinstance(model, Scm):
        return model
    taken = set(model.names)
    noises, mechs = [], []
    for v in model.variables:
        name = "U_" + v.name
        while name in taken:
            name += "_"
        taken.add(name)
        rows = list(model._parent_rows(v.name))
        cuts = {0.0, 1.0}
        cdfs = {}
        for pa in rows:
            cdf = np.cumsum(model.cpt(v.name).rows[pa])
            cdf[-1] = 1.0
            cdfs[pa] = cdf
            cuts.update(float(c) for c in cdf)
        cuts = sorted(c for c in cuts if 0.0 <= c <= 1.0)
        cells = [(lo, hi) for lo, hi in zip(cuts, cuts[1:]) if hi > lo]
        labels = [f"u{i}" for i in range(len(cells))]
        dist = [hi - lo for lo, hi in cells]
        scale = math.fsum(dist)
        dist = [d / scale for d in dist]
        table = {}
        for pa in rows:
            cdf = cdfs[pa]
            for label, (lo, hi) in zip(labels, cells):
                mid = 0.5 * (lo + hi)
                k = min(int(np.searchsorted(cdf, mid, side="right")), len(v.domain) - 1)
                table[(pa, label)] = v.domain.values[k]
        noises.append(NoiseSpec(name, Domain(tuple(labels)), tuple(dist)))
        mechs.append(Mechanism(v.name, model.parents(v.name), name, table))
    return Scm(model.variables, tuple(noises), tuple(mechs))


# -- informational decomposition ---------------------------------------------


class ChannelRule(str, Enum):
    COPY = "copy-of-source"
    LITERAL = "literal"
    COUNTERFACTUAL = "copy-of-counterfactual-source"


@dataclass(frozen=True)
class EdgeChannel:
    """Information carried on edge ``source -> target``."""

    source: str
    target: str
    rule: ChannelRule = ChannelRule.COPY
    value: str | None = None


@dataclass(frozen=True)
class DecomposedScm:
    """An SCM whose mechanisms read their parents through explicit edge channels."""

    base: Scm
    channels: tuple[EdgeChannel, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        keys = [(c.source, c.target) for c in self.channels]
        if len(set(keys)) != len(keys) or set(keys) != set(self.base.edges()):
            raise ModelError("channels must match the causal diagram edges one to one")
        for c in self.channels:
            if c.rule is ChannelRule.LITERAL:
                self.base.domain(c.source).index(c.value)

    def channel(self, source: str, target: str) -> EdgeChannel:
        for c in self.channels:
            if (c.source, c.target) == (source, target):
                return c
        raise UnknownVariable(f"no channel {source}->{target}")

    def with_literal(self, source: str, target: str, value: str) -> "DecomposedScm":
        self.channel(source, target)
        chans = tuple(
            EdgeChannel(source, target, ChannelRule.LITERAL, value)
            if (c.source, c.target) == (source, target)
            else c
            for c in self.channels
        )
        return DecomposedScm(self.base, chans)

    def solve(self, noise: Mapping[str, str]) -> dict[str, str]:
        """Evaluate ``v_i <- f_i(e_pa(i),i, u_i)`` for one noise assignment (keyed by variable)."""
        values: dict[str, str] = {}
        for n in self.base.topological_order():
            m = self.base.mechanism(n)
            received = []
            for p in m.parents:
                c = self.channel(p, n)
                if c.rule is ChannelRule.COPY:
                    received.append(values[p])
                elif c.rule is ChannelRule.LITERAL:
                    received.append(c.value)
                else:
                    raise ModelError(f"channel {p}->{n} reads a counterfactual world")
            values[n] = m(received, noise[n])
        return values


def decompose(scm: Scm) -> DecomposedScm:
    chans = tuple(EdgeChannel(j, i) for (j, i) in sorted(scm.edges()))
    return DecomposedScm(scm, chans)


def fix_parent(mech: Mechanism, parent: str, value: str) -> Mechanism:
    """Drop ``parent`` from a mechanism, reading the constant ``value`` instead."""
    pos = mech.parents.index(parent)
    table = {
        (pa[:pos] + pa[pos + 1:], u): out
        for (pa, u), out in mech.table.items()
        if pa[pos] == value
    }
    return Mechanism(mech.child, mech.parents[:pos] + mech.parents[pos + 1:], mech.noise, table)


def recompose(dec: DecomposedScm) -> Scm:
    """Fold channels back into plain mechanisms; literal channels become constants."""
    mechs = []
    for n in dec.base.names:
        m = dec.base.mechanism(n)
        for p in m.parents:
            c = dec.channel(p, n)
            if c.rule is ChannelRule.LITERAL:
                m = fix_parent(m, p, c.value)
            elif c.rule is ChannelRule.COUNTERFACTUAL:
                raise ModelError(f"channel {p}->{n} reads a counterfactual world")
        mechs.append(m)
    return Scm(dec.base.variables, dec.base.noises, tuple(mechs))
