"""Locality-based evaluation primitives.

Connected conjunctive queries are answered anchor by anchor: every answer
lives inside the ball around its first component, so the per-anchor sets are
disjoint and each one is computed by a search inside that ball.  Local
formulas are evaluated inside induced substructures, and scattered-witness
sentences are decided by a greedy scattered-set pass with an exhaustive
fallback over the (small) candidate set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import LowdegError, ResourceCapExceeded
from .formulas import (
    And,
    DistAtom,
    Exists,
    FalseFormula,
    Forall,
    Formula,
    GeneralizedConjunction,
    Literal,
    Not,
    Or,
    RelAtom,
    RelativizedExists,
    TrueFormula,
    query_graph,
)
from .instrument import bump
from .model import INFINITE, AdjacencyIndex, Database, LocalStructure, NeighborhoodIndex, bounded_distance


@dataclass(frozen=True)
class ConnectedCQ:
    """exists y-bar . body, with a connected body over free + existential vars."""

    free: tuple[str, ...]
    exist: tuple[str, ...]
    body: GeneralizedConjunction

    def __post_init__(self):
        allvars = set(self.free) | set(self.exist)
        used = set(self.body.variables())
        if used != allvars:
            raise LowdegError("all free and existential variables must occur in the body")
        for lit in self.body.literals:
            if not lit.positive and len(lit.atom.args) >= 2:
                raise LowdegError("connected conjunctions may negate unary atoms only")
        if not query_graph(self.body).is_connected():
            raise LowdegError("body query graph is not connected")


@dataclass(frozen=True)
class BasicLocalSentence:
    """There exist `count` pairwise (2*radius)-scattered witnesses of theta."""

    count: int
    radius: int
    var: str
    theta: Formula

    def __post_init__(self):
        if self.count < 1 or self.radius < 0:
            raise LowdegError("need count >= 1 and radius >= 0")


class DatabaseGraph:
    """Adapter exposing a Database to the generic conjunction evaluator."""

    def __init__(self, db: Database):
        self.db = db
        self._facts = {name: set(rows) for name, rows in db.tuples.items()}
        self._touching = db.touching_index()
        self._unary_sets: dict[str, frozenset] = {}

    def domain(self):
        return range(self.db.n)

    def domain_size(self) -> int:
        return self.db.n

    def has_fact(self, name: str, row) -> bool:
        bump()
        return row in self._facts.get(name, ())

    def unary_members(self, name: str):
        rows = self.db.tuples.get(name)
        if rows is None:
            return []
        return [row[0] for row in rows]

    def unary_member_set(self, name: str) -> frozenset:
        cached = self._unary_sets.get(name)
        if cached is None:
            cached = frozenset(self.unary_members(name))
            self._unary_sets[name] = cached
        return cached

    def candidates(self, name: str, args, env, target):
        """Values for ``target`` from a positive atom with some bound argument."""
        anchor_pos = None
        for i, v in enumerate(args):
            if v in env:
                anchor_pos = i
                break
        if anchor_pos is None:
            return None
        out = []
        for rel, row in self._touching[env[args[anchor_pos]]]:
            bump()
            if rel != name:
                continue
            ok = True
            for i, v in enumerate(args):
                if v in env and row[i] != env[v]:
                    ok = False
                    break
            if ok:
                out.append(row[args.index(target)])
        return out


def _order_variables(q: ConnectedCQ) -> list[str]:
    """Anchor-first order in which every later var shares a positive atom edge."""
    allvars = list(dict.fromkeys(q.free + q.exist))
    graph = query_graph(q.body)
    adj: dict[str, set[str]] = {v: set() for v in allvars}
    for e in graph.edges:
        pair = tuple(e)
        adj[pair[0]].add(pair[1])
        adj[pair[1]].add(pair[0])
    start = q.free[0] if q.free else allvars[0]
    order = [start]
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    order.append(v)
                    nxt.append(v)
        frontier = nxt
    if len(order) != len(allvars):
        raise LowdegError("body query graph is not connected")
    return order


def eval_connected_cq(graph, q: ConnectedCQ) -> set[tuple[int, ...]]:
    """q(A) as the disjoint union of per-anchor answer sets.

    ``graph`` is any structure with the DatabaseGraph interface; candidates
    for each variable come from positive atoms linking it to the part already
    assigned, which confines the search to the anchor's neighborhood.
    """
    order = _order_variables(q)
    lits = q.body.literals
    # literal is checkable once its last variable (in assignment order) is bound
    pos_of = {v: i for i, v in enumerate(order)}
    check_at: list[list[Literal]] = [[] for _ in order]
    for lit in lits:
        last = max(pos_of[v] for v in lit.atom.args)
        check_at[last].append(lit)

    def passes(lit: Literal, env) -> bool:
        row = tuple(env[v] for v in lit.atom.args)
        return graph.has_fact(lit.atom.name, row) == lit.positive

    # anchor iteration: through a positive unary literal on the anchor if any
    anchor = order[0]
    anchor_unary = next(
        (l for l in lits if l.positive and len(l.atom.args) == 1 and l.atom.args[0] == anchor),
        None,
    )
    if anchor_unary is not None:
        anchor_iter = graph.unary_members(anchor_unary.atom.name)
    else:
        anchor_iter = graph.domain()

    # positive unary literals prune candidate lists before the literal loop
    member_set = getattr(graph, "unary_member_set", None)
    prefilter: dict[str, object] = {}
    if member_set is not None:
        for lit in lits:
            if lit.positive and len(lit.atom.args) == 1:
                var = lit.atom.args[0]
                if var not in prefilter:
                    prefilter[var] = member_set(lit.atom.name)

    answers: set[tuple[int, ...]] = set()
    free = q.free

    def extend(depth: int, env: dict[str, int]):
        if depth == len(order):
            answers.add(tuple(env[v] for v in free))
            return
        var = order[depth]
        cands = None
        for lit in lits:
            if lit.positive and var in lit.atom.args and any(v in env for v in lit.atom.args):
                cands = graph.candidates(lit.atom.name, lit.atom.args, env, var)
                if cands is not None:
                    break
        if cands is None:
            cands = graph.domain()
        allowed = prefilter.get(var)
        if allowed is not None:
            cands = [c for c in cands if c in allowed]
            bump(len(cands))
        for value in dict.fromkeys(cands):
            bump()
            env[var] = value
            if all(passes(l, env) for l in check_at[depth]):
                extend(depth + 1, env)
            del env[var]

    for a in dict.fromkeys(anchor_iter):
        bump()
        env = {anchor: a}
        if all(passes(l, env) for l in check_at[0]):
            extend(1, env)
    return answers


def eval_local(struct: LocalStructure, phi: Formula, assignment: dict[str, int]) -> bool:
    """Truth of an r-local formula inside an induced substructure.

    Plain quantifiers range over the substructure domain (equivalent by
    locality when the radius is large enough); distance atoms use distances
    inside the substructure.
    """

    def ev(node: Formula, env) -> bool:
        if isinstance(node, RelAtom):
            try:
                row = tuple(env[v] for v in node.args)
            except KeyError as e:
                raise LowdegError(f"free variable {e} unassigned") from None
            return struct.has_fact(node.name, row)
        if isinstance(node, DistAtom):
            if node.x not in env or node.y not in env:
                raise LowdegError("free variable unassigned in dist atom")
            close = struct.inner_distance(env[node.x], env[node.y], node.bound) != INFINITE
            return close if node.op == "<=" else not close
        if isinstance(node, Not):
            return not ev(node.sub, env)
        if isinstance(node, And):
            return ev(node.left, env) and ev(node.right, env)
        if isinstance(node, Or):
            return ev(node.left, env) or ev(node.right, env)
        if isinstance(node, TrueFormula):
            return True
        if isinstance(node, FalseFormula):
            return False
        if isinstance(node, Exists):
            return any(ev(node.body, {**env, node.var: a}) for a in struct.nodes)
        if isinstance(node, Forall):
            return all(ev(node.body, {**env, node.var: a}) for a in struct.nodes)
        if isinstance(node, RelativizedExists):
            centers = [env[c] for c in node.centers]
            return any(ev(node.body, {**env, node.var: a}) for a in struct.ball(centers, node.radius))
        raise LowdegError(f"cannot evaluate {node!r}")

    return ev(phi, dict(assignment))


def check_basic_local(
    db: Database,
    nbhd: NeighborhoodIndex,
    sentence: BasicLocalSentence,
    subset_cap: int = 10**4,
) -> bool:
    """Decide a scattered-witness sentence.

    Compute the witness set S, greedily pick mutually scattered nodes; if the
    greedy pass reaches the count we accept, otherwise S is confined to the
    few balls around the maximal scattered set and an exhaustive search over
    subsets of S decides.
    """
    if nbhd.radius < sentence.radius:
        raise LowdegError("neighborhood index radius too small for sentence")
    adj = nbhd.adj
    r2 = 2 * sentence.radius
    witnesses = []
    for a in range(db.n):
        bump()
        if eval_local(nbhd.local(a), sentence.theta, {sentence.var: a}):
            witnesses.append(a)
    picked: list[int] = []
    for a in witnesses:
        if all(bounded_distance(adj, a, t, r2) is INFINITE for t in picked):
            picked.append(a)
            if len(picked) == sentence.count:
                return True
    if sentence.count == 1:
        return False
    if math.comb(len(witnesses), sentence.count) > subset_cap:
        raise ResourceCapExceeded(
            f"scattered-set fallback over {len(witnesses)} witnesses exceeds cap"
        )
    for combo in itertools.combinations(witnesses, sentence.count):
        if all(
            bounded_distance(adj, a, b, r2) is INFINITE
            for a, b in itertools.combinations(combo, 2)
        ):
            return True
    return False
