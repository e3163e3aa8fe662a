"""Causal diagrams, directed paths, recanting witnesses and DOT export."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import NotAPath, RepeatedNode, TooManyPaths, UnknownNode
from .model import topological_sort

MAX_PATHS = 10_000


class World(str, Enum):
    FACTUAL = "factual"
    PI = "pi"
    NESTED = "nested"
    EXOGENOUS = "exogenous"
    EXOGENOUS_COPY = "exogenous-copy"


_WORLD_RANK = {w: i for i, w in enumerate(World)}


class Node(NamedTuple):
    """A variable name tagged with the world it lives in."""

    name: str
    world: World = World.FACTUAL

    def __str__(self) -> str:
        if self.world is World.FACTUAL:
            return self.name
        if self.world is World.PI:
            return self.name + "^pi"
        return f"{self.name}[{self.world.value}]"

    def sort_key(self):
        return (_WORLD_RANK[self.world], self.name)


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))
        known = set(self.nodes)
        for j, i in self.edges:
            if j not in known or i not in known:
                raise UnknownNode(f"edge {j}->{i} has an endpoint outside the graph")
        topological_sort(self.nodes, {n: self.parents(n) for n in self.nodes})

    def _check(self, node: str):
        if node not in self.nodes:
            raise UnknownNode(f"unknown node {node!r}")

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(j for j, i in self.edges if i == node))

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(i for j, i in self.edges if j == node))

    def topological_order(self) -> tuple[str, ...]:
        return topological_sort(self.nodes, {n: self.parents(n) for n in self.nodes})

    def reaches(self, source: str, target: str) -> bool:
        """True if a directed path (possibly empty) leads from source to target."""
        seen, todo = set(), [source]
        while todo:
            n = todo.pop()
            if n == target:
                return True
            if n not in seen:
                seen.add(n)
                todo.extend(self.children(n))
        return False


@dataclass(frozen=True)
class CausalPath:
    """Simple directed path ``nodes[0] -> ... -> nodes[-1]``."""

    nodes: tuple[str, ...]

    @property
    def head(self) -> str:
        return self.nodes[0]

    @property
    def tail(self) -> str:
        return self.nodes[-1]

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    def __str__(self) -> str:
        return "->".join(self.nodes)


def causal_diagram(model) -> Dag:
    """One node per endogenous variable, an edge j -> i per declared parent j of i."""
    return Dag(model.names, model.edges())


def parse_path(text: str) -> list[str]:
    """Split ``"A->M->Y"`` (spaces tolerated) into node names."""
    return [part.strip() for part in text.split("->")]


def validate_path(dag: Dag, nodes: Sequence[str] | str) -> CausalPath:
    if isinstance(nodes, str):
        nodes = parse_path(nodes)
    nodes = tuple(nodes)
    if len(nodes) < 2:
        raise NotAPath("a causal path needs at least two nodes")
    for n in nodes:
        dag._check(n)
    if len(set(nodes)) != len(nodes):
        dup = next(n for n in nodes if nodes.count(n) > 1)
        raise RepeatedNode(f"node {dup!r} repeats on the path")
    for j, i in zip(nodes, nodes[1:]):
        if (j, i) not in dag.edges:
            raise NotAPath(f"edge {j}->{i} is not in the diagram")
    return CausalPath(nodes)


def directed_paths(dag: Dag, source: str, target: str, limit: int = MAX_PATHS) -> list[CausalPath]:
    """All simple directed paths from ``source`` to ``target``, lexicographically ordered."""
    dag._check(source)
    dag._check(target)
    found: list[tuple[str, ...]] = []

    def walk(trail: list[str]):
        n = trail[-1]
        if n == target:
            if len(trail) >= 2:
                found.append(tuple(trail))
                if len(found) > limit:
                    raise TooManyPaths(f"more than {limit} paths from {source} to {target}")
            return
        for c in dag.children(n):
            if c not in trail:
                trail.append(c)
                walk(trail)
                trail.pop()

    walk([source])
    return [CausalPath(p) for p in sorted(found)]


def desc_pi(path: CausalPath) -> tuple[str, ...]:
    """Nodes of the path that receive a counterfactual copy: all but the head."""
    return path.nodes[1:]


def find_recanting_witness(dag: Dag, path: CausalPath) -> str | None:
    """First interior node of ``path`` with a route to the tail that leaves the path there.

    A node W qualifies when some child of W other than W's successor on the
    path reaches the tail.
    """
    tail = path.tail
    for pos in range(1, len(path.nodes) - 1):
        w, nxt = path.nodes[pos], path.nodes[pos + 1]
        for c in dag.children(w):
            if c != nxt and dag.reaches(c, tail):
                return w
    return None


# -- intervention diagrams ---------------------------------------------------


@dataclass(frozen=True)
class Diagram:
    """Causal diagram over world-tagged nodes.

    ``annotations`` attaches constant inputs to nodes (e.g. ``a=1`` on a node
    whose channel from ``a`` carries a literal).
    """

    nodes: tuple[Node, ...]
    edges: frozenset[tuple[Node, Node]]
    path_edges: frozenset[tuple[Node, Node]] = frozenset()
    annotations: tuple[tuple[Node, str], ...] = ()

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes), key=Node.sort_key))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "path_edges", frozenset(self.path_edges))
        object.__setattr__(self, "annotations", tuple(sorted(set(self.annotations), key=lambda a: (a[0].sort_key(), a[1]))))
        if not self.path_edges <= self.edges:
            raise ValueError("path edges must be diagram edges")
        known = set(nodes)
        for j, i in self.edges:
            if j not in known or i not in known:
                raise UnknownNode(f"edge {j}->{i} has an endpoint outside the diagram")
        topological_sort(nodes, {n: [j for j, i in self.edges if i == n] for n in nodes})

    def parents(self, node: Node) -> tuple[Node, ...]:
        return tuple(sorted((j for j, i in self.edges if i == node), key=Node.sort_key))

    def annotations_of(self, node: Node) -> tuple[str, ...]:
        return tuple(a for n, a in self.annotations if n == node)


def _dot_ids(nodes: Iterable[Node]) -> dict[Node, str]:
    suffix = {
        World.FACTUAL: "",
        World.PI: "_pi",
        World.NESTED: "_nested",
        World.EXOGENOUS: "",
        World.EXOGENOUS_COPY: "_prime",
    }
    nodes = list(nodes)
    lowered = {n: n.name.lower() for n in nodes}
    if len(set(lowered.values())) < len({n.name for n in nodes}):
        # lowercasing would merge distinct variables; keep names as written
        lowered = {n: n.name for n in nodes}
    ids = {}
    for n in nodes:
        base = lowered[n]
        if n.world in (World.EXOGENOUS, World.EXOGENOUS_COPY):
            base = "u_" + base
        ids[n] = base + suffix[n.world]
    return ids


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(obj: Union[Dag, Diagram], path: CausalPath | None = None, name: str = "G") -> str:
    """Deterministic DOT rendering; path edges red, all others blue."""
    if isinstance(obj, Dag):
        nodes = [Node(n) for n in obj.nodes]
        edges = {(Node(j), Node(i)) for j, i in obj.edges}
        marked = {(Node(j), Node(i)) for j, i in path.edges} if path else set()
        obj = Diagram(tuple(nodes), frozenset(edges), frozenset(marked))
    ids = _dot_ids(obj.nodes)
    lines = [f"digraph {_quote(name)} {{"]
    for n in obj.nodes:
        attrs = []
        notes = obj.annotations_of(n)
        if notes:
            attrs.append("label=" + _quote(ids[n] + " [" + ", ".join(notes) + "]"))
        if n.world in (World.EXOGENOUS, World.EXOGENOUS_COPY):
            attrs.append("shape=box")
        lines.append(f"  {_quote(ids[n])}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    for j, i in sorted(obj.edges, key=lambda e: (ids[e[0]], ids[e[1]])):
        color = "red" if (j, i) in obj.path_edges else "blue"
        lines.append(f"  {_quote(ids[j])} -> {_quote(ids[i])} [color={color}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
