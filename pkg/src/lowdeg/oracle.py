"""Brute-force FO evaluator used as ground truth for every engine.

Shares nothing with the engine beyond the Formula type and the database's
fact lists: it builds its own fact sets and its own co-occurrence adjacency,
evaluates quantifiers over the full domain, and answers distance atoms by
plain BFS.  Truth of a subformula is memoized on the restriction of the
assignment to its free variables, which changes nothing semantically.
"""

from __future__ import annotations

import itertools
from collections import deque

from .errors import ResourceCapExceeded
from .formulas import (
    And,
    DistAtom,
    Exists,
    FalseFormula,
    Forall,
    Formula,
    Not,
    Or,
    RelAtom,
    RelativizedExists,
    TrueFormula,
    free_vars,
)


class _OracleContext:
    def __init__(self, db):
        self.n = db.n
        self.facts = {name: set(rows) for name, rows in db.tuples.items()}
        nbrs = [set() for _ in range(db.n)]
        for rows in db.tuples.values():
            for row in rows:
                distinct = set(row)
                if len(distinct) < 2:
                    continue
                for a in distinct:
                    nbrs[a].update(distinct)
        for a, s in enumerate(nbrs):
            s.discard(a)
        self.adj = [sorted(s) for s in nbrs]
        self._fv_cache: dict[int, tuple[str, ...]] = {}
        self._truth_cache: dict = {}

    def distance_at_most(self, a: int, b: int, bound: int) -> bool:
        if a == b:
            return True
        seen = {a}
        frontier = deque([(a, 0)])
        while frontier:
            u, d = frontier.popleft()
            if d == bound:
                continue
            for v in self.adj[u]:
                if v == b:
                    return True
                if v not in seen:
                    seen.add(v)
                    frontier.append((v, d + 1))
        return False

    def ball(self, centers, radius: int) -> list[int]:
        seen = set(centers)
        frontier = list(seen)
        for _ in range(radius):
            nxt = []
            for u in frontier:
                for v in self.adj[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            if not nxt:
                break
            frontier = nxt
        return sorted(seen)

    def fv(self, node: Formula) -> tuple[str, ...]:
        key = id(node)
        if key not in self._fv_cache:
            self._fv_cache[key] = free_vars(node)
        return self._fv_cache[key]

    def holds(self, node: Formula, env: dict[str, int]) -> bool:
        key = (id(node), tuple(env[v] for v in self.fv(node)))
        cached = self._truth_cache.get(key)
        if cached is not None:
            return cached
        value = self._eval(node, env)
        self._truth_cache[key] = value
        return value

    def _eval(self, node: Formula, env) -> bool:
        if isinstance(node, RelAtom):
            row = tuple(env[v] for v in node.args)
            return row in self.facts.get(node.name, ())
        if isinstance(node, DistAtom):
            close = self.distance_at_most(env[node.x], env[node.y], node.bound)
            return close if node.op == "<=" else not close
        if isinstance(node, Not):
            return not self.holds(node.sub, env)
        if isinstance(node, And):
            return self.holds(node.left, env) and self.holds(node.right, env)
        if isinstance(node, Or):
            return self.holds(node.left, env) or self.holds(node.right, env)
        if isinstance(node, TrueFormula):
            return True
        if isinstance(node, FalseFormula):
            return False
        if isinstance(node, Exists):
            return any(self.holds(node.body, {**env, node.var: a}) for a in range(self.n))
        if isinstance(node, Forall):
            return all(self.holds(node.body, {**env, node.var: a}) for a in range(self.n))
        if isinstance(node, RelativizedExists):
            centers = [env[c] for c in node.centers]
            return any(
                self.holds(node.body, {**env, node.var: a}) for a in self.ball(centers, node.radius)
            )
        raise TypeError(f"cannot evaluate {node!r}")


def naive_eval(db, phi: Formula, assignment: dict[str, int] | None = None, guard: int = 10**7):
    """Exact answer set of ``phi`` on ``db`` (set of tuples in free-var order).

    ``assignment`` pre-binds some free variables; the remaining ones are
    enumerated over the full domain, guarded by ``n**k <= guard``.
    """
    ctx = _OracleContext(db)
    env = dict(assignment or {})
    todo = [v for v in free_vars(phi) if v not in env]
    if db.n ** len(todo) > guard:
        raise ResourceCapExceeded(
            f"oracle guard: {db.n}^{len(todo)} assignments exceeds {guard}"
        )
    order = free_vars(phi)
    answers = set()
    for combo in itertools.product(range(db.n), repeat=len(todo)):
        env.update(zip(todo, combo))
        if ctx.holds(phi, env):
            answers.add(tuple(env[v] for v in order))
    return answers


def naive_count(db, phi: Formula, guard: int = 10**7) -> int:
    return len(naive_eval(db, phi, guard=guard))
