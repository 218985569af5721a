"""Relational structures, Gaifman graph, bounded distances, and ball indexes.

Domain elements are dense integers 0..n-1; the linear order used everywhere
(iteration, tuple lexicographic order) is integer order.  Degree bounds clamp
the degree to at least 2: degree-0/1 databases are accepted and processed,
only the bound formulas use the clamp.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import FactFileError, LowdegError
from .instrument import bump

INFINITE = math.inf


@dataclass(frozen=True)
class Signature:
    """Relation names with their arities; names unique, arities >= 1."""

    relations: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen = set()
        for name, arity in self.relations:
            if name in seen:
                raise LowdegError(f"duplicate relation name {name!r}")
            if arity < 1:
                raise LowdegError(f"relation {name!r} has arity {arity} < 1")
            seen.add(name)

    def arity(self, name: str) -> int:
        for rel, ar in self.relations:
            if rel == name:
                return ar
        raise LowdegError(f"unknown relation {name!r}")

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.relations)

    def __contains__(self, name: str) -> bool:
        return any(rel == name for rel, _ in self.relations)


class Database:
    """Finite relational structure over a dense integer domain."""

    def __init__(self, n: int, signature: Signature, tuples: dict[str, list[tuple[int, ...]]]):
        if n < 1:
            raise LowdegError("domain must be non-empty")
        self.n = n
        self.signature = signature
        self.tuples: dict[str, list[tuple[int, ...]]] = {}
        for name, arity in signature.relations:
            rows = tuples.get(name, [])
            seen: set[tuple[int, ...]] = set()
            kept = []
            for row in rows:
                if len(row) != arity:
                    raise LowdegError(f"tuple {row} has wrong arity for {name} (expected {arity})")
                for c in row:
                    if not (0 <= c < n):
                        raise LowdegError(f"component {c} out of domain [0,{n}) in {name}{row}")
                if row not in seen:
                    seen.add(row)
                    kept.append(tuple(row))
            self.tuples[name] = kept

    def relation_names(self) -> tuple[str, ...]:
        return self.signature.names()

    def fact_count(self) -> int:
        return sum(len(rows) for rows in self.tuples.values())

    def touching_index(self) -> list[list[tuple[str, tuple[int, ...]]]]:
        """Per node, the facts it occurs in.  Built once, cached."""
        cached = getattr(self, "_touching", None)
        if cached is None:
            cached = [[] for _ in range(self.n)]
            for name, rows in self.tuples.items():
                for row in rows:
                    for c in set(row):
                        cached[c].append((name, row))
            self._touching = cached
        return cached


def load_database(text) -> Database:
    """Parse the fact-file format.

    First non-comment line is ``domain N``; optional ``#rel NAME ARITY``
    declarations; fact lines ``NAME v1 ... vk``; ``#`` starts a comment.
    Undeclared relations get the arity of their first fact line; duplicate
    fact lines are dropped.
    """
    if hasattr(text, "read"):
        text = text.read()
    declared: list[tuple[str, int]] = []
    declared_names: set[str] = set()
    n = None
    facts: dict[str, list[tuple[int, ...]]] = {}
    arities: dict[str, int] = {}
    order: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#rel"):
            parts = line.split()
            if len(parts) != 3:
                raise FactFileError("expected '#rel NAME ARITY'", lineno)
            name = parts[1]
            try:
                arity = int(parts[2])
            except ValueError:
                raise FactFileError(f"bad arity {parts[2]!r}", lineno)
            if arity < 1:
                raise FactFileError(f"arity must be >= 1, got {arity}", lineno)
            if name in declared_names:
                raise FactFileError(f"relation {name!r} declared twice", lineno)
            declared_names.add(name)
            declared.append((name, arity))
            arities[name] = arity
            continue
        if "#" in line:
            line = line[: line.index("#")].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if parts[0] != "domain" or len(parts) != 2:
                raise FactFileError("first line must be 'domain N'", lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise FactFileError(f"bad domain size {parts[1]!r}", lineno)
            if n < 1:
                raise FactFileError("domain must be >= 1", lineno)
            continue
        name = parts[0]
        try:
            comps = tuple(int(p) for p in parts[1:])
        except ValueError:
            raise FactFileError(f"bad component in {line!r}", lineno)
        if not comps:
            raise FactFileError(f"fact for {name!r} has no components", lineno)
        if name in arities:
            if len(comps) != arities[name]:
                raise FactFileError(
                    f"arity mismatch for {name}: got {len(comps)}, declared {arities[name]}", lineno
                )
        else:
            arities[name] = len(comps)
        for c in comps:
            if c >= n or c < 0:
                raise FactFileError(f"component out of domain: {c} not in [0,{n})", lineno)
        if name not in facts:
            facts[name] = []
            order.append(name)
        facts[name].append(comps)

    if n is None:
        raise FactFileError("missing 'domain N' line")
    for name in order:
        if name not in declared_names:
            declared.append((name, arities[name]))
    return Database(n, Signature(tuple(declared)), facts)


def format_database(db: Database) -> str:
    """Serialize back to the fact-file format (deterministic)."""
    lines = [f"domain {db.n}"]
    for name, arity in db.signature.relations:
        lines.append(f"#rel {name} {arity}")
    for name, _ in db.signature.relations:
        for row in db.tuples[name]:
            lines.append(name + " " + " ".join(str(c) for c in row))
    return "\n".join(lines) + "\n"


class AdjacencyIndex:
    """Gaifman-graph adjacency restricted to a relation subset.

    Symmetric, loop-free, neighbor lists sorted; immutable after construction.
    """

    def __init__(self, n: int, neighbors: list[list[int]], rels: frozenset[str]):
        self.n = n
        self._nbrs = neighbors
        self.rels = rels

    def neighbors(self, a: int) -> list[int]:
        if not (0 <= a < self.n):
            raise LowdegError(f"node {a} out of domain [0,{self.n})")
        return self._nbrs[a]

    def degree(self) -> int:
        return max((len(ns) for ns in self._nbrs), default=0)

    def clamped_degree(self) -> int:
        return max(2, self.degree())


def gaifman_graph(db: Database, rels) -> AdjacencyIndex:
    """Edge {a,b} iff a != b co-occur in some tuple of a relation in rels."""
    rels = frozenset(rels)
    for name in rels:
        if name not in db.signature:
            raise LowdegError(f"unknown relation {name!r}")
    nbrs: list[set[int]] = [set() for _ in range(db.n)]
    for name in db.relation_names():
        if name not in rels:
            continue
        for row in db.tuples[name]:
            distinct = set(row)
            bump(len(row))
            if len(distinct) < 2:
                continue
            for a in distinct:
                nbrs[a].update(distinct)
    out = []
    for a, s in enumerate(nbrs):
        s.discard(a)
        out.append(sorted(s))
    return AdjacencyIndex(db.n, out, rels)


def bounded_distance(adj: AdjacencyIndex, a: int, b: int, bound: int):
    """dist(a,b) if <= bound, else INFINITE.  BFS cut off at the bound."""
    if not (0 <= a < adj.n and 0 <= b < adj.n):
        raise LowdegError("node out of domain")
    if bound < 0:
        raise LowdegError("bound must be >= 0")
    if a == b:
        return 0
    seen = {a}
    frontier = [a]
    for depth in range(1, bound + 1):
        nxt = []
        for u in frontier:
            for v in adj.neighbors(u):
                bump()
                if v == b:
                    return depth
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return INFINITE
        frontier = nxt
    return INFINITE


@dataclass
class LocalStructure:
    """Induced substructure on a node set, with its own restricted adjacency.

    ``tuples`` holds the re-listed facts of the indexed relations; ``adj`` is
    the Gaifman adjacency of the parent structure restricted to ``nodes`` so
    that distances inside the substructure are well defined.
    """

    nodes: tuple[int, ...]
    tuples: dict[str, list[tuple[int, ...]]]
    adj: dict[int, list[int]]
    node_set: frozenset[int] = field(init=False)
    _fact_sets: dict[str, set] = field(init=False)

    def __post_init__(self):
        self.node_set = frozenset(self.nodes)
        self._fact_sets = {name: set(rows) for name, rows in self.tuples.items()}

    def has_fact(self, name: str, row: tuple) -> bool:
        s = self._fact_sets.get(name)
        return s is not None and row in s

    def inner_distance(self, a, b, bound: int):
        """Bounded BFS over the restricted adjacency."""
        if a == b:
            return 0
        seen = {a}
        frontier = [a]
        for depth in range(1, bound + 1):
            nxt = []
            for u in frontier:
                for v in self.adj.get(u, ()):
                    bump()
                    if v == b:
                        return depth
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            if not nxt:
                return INFINITE
            frontier = nxt
        return INFINITE

    def ball(self, centers, radius: int) -> list:
        """Nodes within the radius of any center, inside this substructure."""
        seen = set(centers)
        frontier = list(seen)
        for _ in range(radius):
            nxt = []
            for u in frontier:
                for v in self.adj.get(u, ()):
                    bump()
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            if not nxt:
                break
            frontier = nxt
        return sorted(seen)


class NeighborhoodIndex:
    """Per-node r-balls plus induced substructures, by frontier expansion.

    Balls are sorted lists; substructures are built lazily and cached since
    most pipeline passes only consume the ball sets.
    """

    def __init__(self, db: Database, adj: AdjacencyIndex, radius: int):
        if radius < 0:
            raise LowdegError("radius must be >= 0")
        self.db = db
        self.adj = adj
        self.radius = radius
        self.balls: list[list[int]] = []
        self._local_cache: dict[tuple[int, ...], LocalStructure] = {}
        for a in range(db.n):
            ball = {a}
            frontier = [a]
            for _ in range(radius):
                nxt = []
                for u in frontier:
                    for v in adj.neighbors(u):
                        bump()
                        if v not in ball:
                            ball.add(v)
                            nxt.append(v)
                if not nxt:
                    break
                frontier = nxt
            self.balls.append(sorted(ball))
            bump(len(ball))

    def ball(self, a: int) -> list[int]:
        return self.balls[a]

    def tuple_ball(self, comps) -> list[int]:
        out = set()
        for c in comps:
            out.update(self.balls[c])
        return sorted(out)

    def local(self, a: int) -> LocalStructure:
        return self.local_of_tuple((a,))

    def local_of_tuple(self, comps: tuple[int, ...]) -> LocalStructure:
        """Induced substructure on the union of the component balls."""
        key = tuple(sorted(set(comps)))
        cached = self._local_cache.get(key)
        if cached is not None:
            return cached
        nodes = self.tuple_ball(key)
        node_set = set(nodes)
        touching = self.db.touching_index()
        rows: dict[str, list[tuple[int, ...]]] = {}
        seen: set[tuple[str, tuple[int, ...]]] = set()
        for v in nodes:
            for name, row in touching[v]:
                if name not in self.adj.rels:
                    continue
                if (name, row) in seen:
                    continue
                bump()
                if all(c in node_set for c in row):
                    seen.add((name, row))
                    rows.setdefault(name, []).append(row)
        adj = {v: [u for u in self.adj.neighbors(v) if u in node_set] for v in nodes}
        local = LocalStructure(tuple(nodes), rows, adj)
        self._local_cache[key] = local
        return local


def neighborhoods(db: Database, rels, r: int) -> NeighborhoodIndex:
    """All r-balls of the Gaifman graph restricted to ``rels``."""
    adj = gaifman_graph(db, rels)
    return NeighborhoodIndex(db, adj, r)
