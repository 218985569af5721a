"""Reduce (database, query, epsilon) to a colored graph with a quantifier-free query.

The output bundles a colored graph G over a binary signature (unary colors
plus a symmetric closeness relation E and component relations F_i), a
quantifier-free formula psi = psi1 & psi2 (psi1: no two distinct answer
positions are E-adjacent; psi2: a positive combination of unary atoms), and a
two-way encoding f that is a bijection between the answers of the original
query and of psi on G.

Domain of G: the database nodes, then one node per (connected tuple, injective
slot map) pair ordered by (anchor, tuple length, tuple, slot map), then a
single padding node last.  E is kept virtual: membership and adjacency rows
are derived from the tuple-closeness store and a node-to-tuples index, which
preserves the probe counts without materializing the quadratic edge set.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, LowdegError, NeighborhoodTooLarge, ResourceCapExceeded
from .formulas import (
    And,
    FalseFormula,
    Formula,
    Not,
    Or,
    RelAtom,
    TRUE,
    FALSE,
    TrueFormula,
    free_vars,
    join_and,
    join_or,
)
from .instrument import bump
from .localize import LocalizedQuery, eval_and_strip_sentences, localize
from .localeval import eval_local
from .model import Database, LocalStructure, NeighborhoodIndex, gaifman_graph
from .storing import TupleStore


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Blocks of {1..k}, each sorted, ordered by minimum element."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        mins = [b[0] for b in self.blocks]
        if mins != sorted(mins):
            raise LowdegError("blocks must be ordered by minimum element")

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)


def all_partitions(k: int) -> list[Partition]:
    """All set partitions of {1..k}, in lex order of the block-assignment vector."""
    if k < 1:
        raise LowdegError("k must be >= 1")
    out: list[Partition] = []

    def rec(assign: list[int], used: int):
        if len(assign) == k:
            blocks: list[list[int]] = [[] for _ in range(used)]
            for i, b in enumerate(assign):
                blocks[b].append(i + 1)
            out.append(Partition(tuple(tuple(b) for b in blocks)))
            return
        for b in range(used + 1):
            rec(assign + [b], max(used, b + 1))

    rec([], 0)
    return out


def injections(k: int) -> list[tuple[int, ...]]:
    """All injective maps {1..s} -> {1..k} for s = 1..k, as value tuples, lex order."""
    out = []
    for s in range(1, k + 1):
        out.extend(itertools.permutations(range(1, k + 1), s))
    return out


# ---------------------------------------------------------------------------
# closeness


class ClosenessOracle:
    """Constant-probe test for dist(a,b) <= threshold over the database."""

    def __init__(self, store: TupleStore, threshold: int, n: int):
        self.store = store
        self.threshold = threshold
        self.n = n

    def close(self, a: int, b: int) -> bool:
        if a == b:
            bump()
            return True
        key = (a, b) if a < b else (b, a)
        return self.store.lookup(key) is not None


def build_closeness(nbhd: NeighborhoodIndex, epsilon: float) -> ClosenessOracle:
    """Store all unordered pairs at distance <= the index radius."""
    n = nbhd.db.n
    store = TupleStore(n, 2, epsilon)
    for a in range(n):
        for b in nbhd.ball(a):
            if b > a:
                store.insert((a, b), True)
                bump()
    return ClosenessOracle(store, nbhd.radius, n)


def detect_partition(closeness: ClosenessOracle, abar: tuple[int, ...]) -> Partition:
    """The unique partition whose blocks are the closeness components of abar."""
    k = len(abar)
    reach = [[i == j for j in range(k)] for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if closeness.close(abar[i], abar[j]):
                reach[i][j] = reach[j][i] = True
    for m in range(k):
        rm = reach[m]
        for i in range(k):
            if reach[i][m]:
                ri = reach[i]
                for j in range(k):
                    if rm[j]:
                        ri[j] = True
    bump(k * k * k)
    roots: dict[int, list[int]] = {}
    for i in range(k):
        root = min(j for j in range(k) if reach[i][j])
        roots.setdefault(root, []).append(i + 1)
    blocks = tuple(tuple(roots[r]) for r in sorted(roots))
    return Partition(blocks)


# ---------------------------------------------------------------------------
# pointed-neighborhood canonical forms


def component_type(struct: LocalStructure, points: tuple[int, ...], cap: int = 24):
    """Canonical key of the pointed substructure (struct, points).

    Equal keys iff there is an isomorphism of the substructure (facts and the
    restricted adjacency) mapping the point tuples componentwise.  Computed by
    color refinement plus individualization, taking the minimum serialization.
    """
    nodes = list(struct.nodes)
    m = len(nodes)
    if m > cap:
        raise NeighborhoodTooLarge(m, cap)
    index = {v: i for i, v in enumerate(nodes)}
    point_pos: list[tuple[int, ...]] = [() for _ in range(m)]
    for pos, p in enumerate(points):
        i = index[p]
        point_pos[i] = point_pos[i] + (pos,)
    rel_facts = {
        name: [tuple(index[c] for c in row) for row in rows]
        for name, rows in struct.tuples.items()
    }
    adj = [sorted(index[u] for u in struct.adj.get(v, ())) for v in nodes]

    incidence = [[] for _ in range(m)]
    for name in sorted(rel_facts):
        for row in rel_facts[name]:
            for pos, i in enumerate(row):
                incidence[i].append((name, pos))
    base = [
        (point_pos[i], tuple(sorted(incidence[i])), len(adj[i]))
        for i in range(m)
    ]

    def intern(colors):
        table = {}
        out = []
        for c in colors:
            if c not in table:
                table[c] = len(table)
            out.append(table[c])
        return out

    def refine(colors):
        colors = list(colors)
        while True:
            new = [
                (colors[i], tuple(sorted(colors[j] for j in adj[i])))
                for i in range(m)
            ]
            new = intern(new)
            if len(set(new)) == len(set(colors)):
                return new
            colors = new

    def serialize(order):
        rank = {nodes[i]: r for r, i in enumerate(order)}
        pts = tuple(rank[p] for p in points)
        rels = tuple(
            (name, tuple(sorted(tuple(order.index(i) for i in row) for row in rows)))
            for name, rows in sorted(rel_facts.items())
        )
        # include restricted adjacency: facts alone miss edges from
        # partially-overlapping tuples at the boundary
        edges = tuple(
            sorted(
                (min(order.index(i), order.index(index[u])), max(order.index(i), order.index(index[u])))
                for i in range(m)
                for u in struct.adj.get(nodes[i], ())
            )
        )
        return (m, pts, rels, edges)

    best: list = [None]

    def rec(colors):
        cells: dict[int, list[int]] = {}
        for i, c in enumerate(colors):
            cells.setdefault(c, []).append(i)
        target = None
        for c in sorted(cells):
            if len(cells[c]) > 1:
                target = cells[c]
                break
        if target is None:
            order = sorted(range(m), key=lambda i: colors[i])
            ser = serialize(order)
            if best[0] is None or ser < best[0]:
                best[0] = ser
            return
        for v in target:
            branched = [(colors[i], 0 if i == v else 1) for i in range(m)]
            rec(refine(intern(branched)))

    rec(refine(intern(base)))
    return best[0]


# ---------------------------------------------------------------------------
# the reduced instance


_BOT_KEY = ("bot",)


class ReducedInstance:
    """Colored graph, quantifier-free query, and the two-way answer encoding."""

    def __init__(
        self,
        db: Database,
        variables: tuple[str, ...],
        radius: int,
        epsilon: float,
        phi_local: Formula,
    ):
        self.db = db
        self.variables = variables
        self.k = len(variables)
        self.radius = radius
        self.threshold = 2 * radius + 1
        self.epsilon = epsilon
        self.phi_local = phi_local
        self.n_a = db.n
        # populated by the builder
        self.iotas: list[tuple[int, ...]] = []
        self.iota_ids: dict[tuple[int, ...], int] = {}
        self.v_count = 0
        self.v_anchor = np.empty(0, dtype=np.int64)
        self.v_arity = np.empty(0, dtype=np.int8)
        self.v_iota = np.empty(0, dtype=np.int32)
        self.v_type = np.empty(0, dtype=np.int32)
        self.v_flat = np.empty(0, dtype=np.int64)
        self.v_offsets = np.empty(0, dtype=np.int64)
        self.type_count = 0
        self.type_arity: list[int] = []
        self.closeness: ClosenessOracle | None = None
        self.zeta: dict[int, TupleStore] = {}
        self.cont_indptr = np.empty(0, dtype=np.int64)
        self.cont_data = np.empty(0, dtype=np.int64)
        # plain-list mirrors of the hot arrays: python int access beats
        # numpy scalar access on the per-probe paths
        self._off_list: list[int] = [0]
        self._flat_list: list[int] = []
        self._iota_list: list[int] = []
        self._type_list: list[int] = []
        self.balls: list[list[int]] | None = None
        self.partitions: list[Partition] = []
        self.sat: dict[int, set[tuple[int, ...]]] = {}
        self.psi1: Formula = TRUE
        self.psi2: Formula = FALSE
        self.psi: Formula = FALSE
        self._members_cache: dict[tuple, np.ndarray] = {}

    # -- node layout -------------------------------------------------------

    @property
    def bot(self) -> int:
        return self.n_a + self.v_count

    @property
    def total(self) -> int:
        return self.n_a + self.v_count + 1

    def is_tuple_node(self, g: int) -> bool:
        return self.n_a <= g < self.n_a + self.v_count

    def node_tuple(self, g: int) -> tuple[int, ...]:
        i = g - self.n_a
        return tuple(self._flat_list[self._off_list[i] : self._off_list[i + 1]])

    def node_iota(self, g: int) -> tuple[int, ...]:
        return self.iotas[self._iota_list[g - self.n_a]]

    # -- virtual E ----------------------------------------------------------

    def e_adjacent(self, u: int, w: int) -> bool:
        """Symmetric closeness edge: some components within the threshold."""
        if u == w or not (self.is_tuple_node(u) and self.is_tuple_node(w)):
            bump()
            return False
        for b in self.node_tuple(u):
            for c in self.node_tuple(w):
                if self.closeness.close(b, c):
                    return True
        return False

    def e_neighbors(self, u: int) -> list[int]:
        if not self.is_tuple_node(u):
            return []
        near: set[int] = set()
        for b in set(self.node_tuple(u)):
            near.update(self.balls[b])
        out: set[int] = set()
        for node in near:
            lo, hi = self.cont_indptr[node], self.cont_indptr[node + 1]
            out.update(self.cont_data[lo:hi].tolist())
        out.discard(u)
        bump(len(out) + len(near))
        return sorted(out)

    def f_neighbors(self, g: int) -> list[int]:
        """Gaifman neighbors through the component relations F_i."""
        if self.is_tuple_node(g):
            return sorted(set(self.node_tuple(g)))
        if g < self.n_a:
            lo, hi = self.cont_indptr[g], self.cont_indptr[g + 1]
            return sorted(set(self.cont_data[lo:hi].tolist()))
        return []

    def measured_degree(self) -> int:
        """Gaifman degree of G (small instances; E rows derived on demand)."""
        best = 0
        for g in range(self.total):
            nbrs = set(self.f_neighbors(g))
            if self.is_tuple_node(g):
                nbrs.update(self.e_neighbors(g))
            nbrs.discard(g)
            best = max(best, len(nbrs))
        return best

    # -- colors -------------------------------------------------------------

    def unary_holds(self, key: tuple, g: int) -> bool:
        bump()
        if key == _BOT_KEY:
            return g == self.bot
        if not self.is_tuple_node(g):
            return False
        i = g - self.n_a
        kind = key[0]
        if kind == "iota":
            return self._iota_list[i] == key[1]
        if kind == "type":
            return self._type_list[i] == key[1]
        if kind == "class":
            return self._iota_list[i] == key[1] and self._type_list[i] == key[2]
        raise LowdegError(f"unknown color {key!r}")

    def members(self, key: tuple) -> np.ndarray:
        """Sorted node ids carrying the color; cached."""
        cached = self._members_cache.get(key)
        if cached is not None:
            return cached
        if key == _BOT_KEY:
            out = np.array([self.bot], dtype=np.int64)
        elif key[0] == "iota":
            out = self.n_a + np.nonzero(self.v_iota == key[1])[0]
        elif key[0] == "type":
            out = self.n_a + np.nonzero(self.v_type == key[1])[0]
        elif key[0] == "class":
            out = self.n_a + np.nonzero((self.v_iota == key[1]) & (self.v_type == key[2]))[0]
        else:
            raise LowdegError(f"unknown color {key!r}")
        out = out.astype(np.int64)
        self._members_cache[key] = out
        bump(len(out))
        return out

    # -- the encoding f ------------------------------------------------------

    def apply_f(self, abar) -> tuple[int, ...]:
        if len(abar) != self.k:
            raise LowdegError(f"expected a {self.k}-tuple")
        for a in abar:
            if not (0 <= a < self.n_a):
                raise LowdegError(f"component {a} out of domain")
        part = detect_partition(self.closeness, tuple(abar))
        out = []
        for block in part.blocks:
            comps = tuple(abar[i - 1] for i in block)
            iota_id = self.iota_ids[block]
            v = self.zeta[len(block)].lookup(comps + (iota_id,))
            if v is None:
                raise ContractViolation(f"block {comps} missing from the node map")
            out.append(int(v))
        while len(out) < self.k:
            bump()
            out.append(self.bot)
        return tuple(out)

    def apply_f_inverse(self, vbar):
        if len(vbar) != self.k:
            raise LowdegError(f"expected a {self.k}-tuple")
        out: list[int | None] = [None] * self.k
        for g in vbar:
            bump()
            if g == self.bot:
                continue
            if not self.is_tuple_node(g):
                return None
            comps = self.node_tuple(g)
            iota = self.node_iota(g)
            for pos, target in enumerate(iota):
                bump()
                if out[target - 1] is not None:
                    return None
                out[target - 1] = int(comps[pos])
        if any(c is None for c in out):
            return None
        return tuple(out)

    # -- color-class counts for the counting engine -------------------------

    def class_count(self, key: tuple) -> int:
        return int(len(self.members(key)))


def apply_f(ri: ReducedInstance, abar):
    return ri.apply_f(abar)


def apply_f_inverse(ri: ReducedInstance, vbar):
    return ri.apply_f_inverse(vbar)


# ---------------------------------------------------------------------------
# builder


def _connected_under(closeness: ClosenessOracle, comps: tuple[int, ...]) -> bool:
    s = len(comps)
    if s <= 1:
        return True
    seen = [False] * s
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        i = stack.pop()
        for j in range(s):
            if not seen[j] and closeness.close(comps[i], comps[j]):
                seen[j] = True
                count += 1
                stack.append(j)
    return count == s


def _binary_pair_flags(db: Database, left: np.ndarray, right: np.ndarray, name: str) -> np.ndarray:
    rows = db.tuples.get(name, [])
    if not rows:
        return np.zeros(len(left), dtype=bool)
    folded = np.array(sorted(a * db.n + b for a, b in rows), dtype=np.int64)
    probe = left * db.n + right
    pos = np.searchsorted(folded, probe)
    pos = np.minimum(pos, len(folded) - 1)
    return folded[pos] == probe


def _fast_tuple_arrays(db: Database, nbhd: NeighborhoodIndex, k: int):
    """Vectorized tuple enumeration for k == 2: singles plus close pairs."""
    n = db.n
    pair_a = []
    pair_b = []
    for a in range(n):
        for b in nbhd.ball(a):
            pair_a.append(a)
            pair_b.append(b)
    pa = np.array(pair_a, dtype=np.int64)
    pb = np.array(pair_b, dtype=np.int64)
    bump(len(pa) + n)
    return pa, pb


def _fast_types(db: Database, anchors, seconds, arity) -> np.ndarray:
    """Packed iso-keys for radius-0 tuples over a signature of arity <= 2.

    With radius 0 the substructure is exactly the tuple's node set and the
    point mapping is forced, so the type is the labeled atom table: equality
    pattern, per-position unary colors, and directed binary facts (including
    self-loops) between the positions.
    """
    unary = [name for name, ar in db.signature.relations if ar == 1]
    binary = [name for name, ar in db.signature.relations if ar == 2]
    count = len(anchors)
    keys = np.zeros(count, dtype=np.int64)
    for name in unary:
        flags = np.zeros(db.n, dtype=bool)
        for (a,) in db.tuples[name]:
            flags[a] = True
        keys = keys * 2 + flags[anchors]
        if arity == 2:
            keys = keys * 2 + flags[seconds]
    for name in binary:
        keys = keys * 2 + _binary_pair_flags(db, anchors, anchors, name)
        if arity == 2:
            keys = keys * 2 + _binary_pair_flags(db, anchors, seconds, name)
            keys = keys * 2 + _binary_pair_flags(db, seconds, anchors, name)
            keys = keys * 2 + _binary_pair_flags(db, seconds, seconds, name)
    if arity == 2:
        keys = keys * 2 + (anchors == seconds)
    bump(count)
    return keys


def eliminate_quantifiers(
    db: Database,
    phi: Formula,
    epsilon: float,
    *,
    neighborhood_cap: int = 24,
    sat_combo_cap: int = 200_000,
) -> ReducedInstance:
    """Full preprocessing: localize, strip sentences, and build the instance."""
    if epsilon <= 0:
        raise LowdegError("epsilon must be positive")
    lq = localize(db, phi)
    variables = lq.free
    k = len(variables)
    rels = frozenset(db.signature.names())
    adj = gaifman_graph(db, rels)

    sentences = lq.sentences()
    if sentences:
        nbhd_s = NeighborhoodIndex(db, adj, max(s.radius for s in sentences))
        phi_local = eval_and_strip_sentences(db, nbhd_s, lq)
    else:
        phi_local = eval_and_strip_sentences(db, None, lq)

    ri = ReducedInstance(db, variables, lq.radius, epsilon, phi_local)
    if k == 0:
        if not isinstance(phi_local, (TrueFormula, FalseFormula)):
            raise ContractViolation("sentence did not reduce to a constant")
        ri.psi = phi_local
        ri.psi1 = TRUE
        ri.psi2 = phi_local
        return ri

    ri.iotas = injections(k)
    ri.iota_ids = {io: i for i, io in enumerate(ri.iotas)}
    threshold = ri.threshold

    nbhd_close = NeighborhoodIndex(db, adj, threshold)
    ri.balls = nbhd_close.balls
    ri.closeness = build_closeness(nbhd_close, epsilon)

    max_arity = max(ar for _, ar in db.signature.relations) if db.signature.relations else 1
    fast = k <= 2 and lq.radius == 0 and max_arity <= 2

    # tuple enumeration: per anchor, per length, lexicographic, then slot maps
    tuples_by_arity: dict[int, tuple[np.ndarray, ...]] = {}
    if fast:
        singles = np.arange(db.n, dtype=np.int64)
        tuples_by_arity[1] = (singles,)
        if k == 2:
            pa, pb = _fast_tuple_arrays(db, nbhd_close, k)
            tuples_by_arity[2] = (pa, pb)
    else:
        per_arity: dict[int, list[tuple[int, ...]]] = {s: [] for s in range(1, k + 1)}
        for a in range(db.n):
            pool = {a}
            for _ in range(k - 1):
                grown = set(pool)
                for b in pool:
                    grown.update(nbhd_close.ball(b))
                pool = grown
            pool = sorted(pool)
            per_arity[1].append((a,))
            for s in range(2, k + 1):
                for rest in itertools.product(pool, repeat=s - 1):
                    comps = (a,) + rest
                    bump()
                    if _connected_under(ri.closeness, comps):
                        per_arity[s].append(comps)
        for s, rows in per_arity.items():
            rows.sort()
            cols = tuple(
                np.array([row[i] for row in rows], dtype=np.int64) for i in range(s)
            )
            tuples_by_arity[s] = cols if rows else tuple(np.empty(0, dtype=np.int64) for _ in range(s))

    # types per arity
    nbhd_r = nbhd_close if lq.radius == threshold else NeighborhoodIndex(db, adj, lq.radius)
    type_keys: dict = {}
    ri.type_arity = []
    typed_by_arity: dict[int, np.ndarray] = {}
    rep_by_type: dict[int, tuple[int, ...]] = {}
    for s, cols in tuples_by_arity.items():
        count = len(cols[0])
        if count == 0:
            typed_by_arity[s] = np.empty(0, dtype=np.int64)
            continue
        if fast:
            raw = _fast_types(db, cols[0], cols[1] if s == 2 else None, s)
            uniq, first_idx, inverse = np.unique(raw, return_index=True, return_inverse=True)
            ids = np.empty(len(uniq), dtype=np.int64)
            for local_t in range(len(uniq)):
                tid = ri.type_count
                ri.type_count += 1
                ri.type_arity.append(s)
                ids[local_t] = tid
                idx = int(first_idx[local_t])
                rep_by_type[tid] = tuple(int(c[idx]) for c in cols)
            typed_by_arity[s] = ids[inverse]
            bump(count)
        else:
            out = np.empty(count, dtype=np.int64)
            for i in range(count):
                comps = tuple(int(c[i]) for c in cols)
                struct = nbhd_r.local_of_tuple(comps)
                key = (s, component_type(struct, comps, cap=neighborhood_cap))
                bump()
                tid = type_keys.get(key)
                if tid is None:
                    tid = ri.type_count
                    ri.type_count += 1
                    ri.type_arity.append(s)
                    type_keys[key] = tid
                    rep_by_type[tid] = comps
                out[i] = tid
            typed_by_arity[s] = out

    # V nodes in canonical order: (anchor, arity, tuple lex, iota lex)
    iotas_per_arity = {
        s: [i for i, io in enumerate(ri.iotas) if len(io) == s] for s in range(1, k + 1)
    }
    parts = []
    for s, cols in tuples_by_arity.items():
        count = len(cols[0])
        if count == 0:
            continue
        reps = len(iotas_per_arity[s])
        base = np.repeat(np.arange(count, dtype=np.int64), reps)
        iota_col = np.tile(np.array(iotas_per_arity[s], dtype=np.int32), count)
        block = {
            "anchor": cols[0][base],
            "arity": np.full(len(base), s, dtype=np.int8),
            "iota": iota_col,
            "type": typed_by_arity[s][base],
            "comps": tuple(c[base] for c in cols),
        }
        parts.append(block)
    if parts:
        anchor = np.concatenate([b["anchor"] for b in parts])
        arity = np.concatenate([b["arity"] for b in parts])
        iota = np.concatenate([b["iota"] for b in parts])
        vtype = np.concatenate([b["type"] for b in parts])
        # order: anchor, arity, tuple lex, iota lex (lexsort keys are reversed)
        tuple_keys = []
        for b in parts:
            key = np.zeros(len(b["anchor"]), dtype=np.int64)
            for c in b["comps"]:
                key = key * db.n + c
            tuple_keys.append(key)
        sort_key = np.lexsort(
            (
                iota.astype(np.int64),
                np.concatenate(tuple_keys),
                arity.astype(np.int64),
                anchor,
            )
        )
        ri.v_count = len(sort_key)
        ri.v_anchor = anchor[sort_key]
        ri.v_arity = arity[sort_key]
        ri.v_iota = iota[sort_key].astype(np.int32)
        ri.v_type = vtype[sort_key].astype(np.int32)
        arities = ri.v_arity.astype(np.int64)
        ri.v_offsets = np.zeros(ri.v_count + 1, dtype=np.int64)
        np.cumsum(arities, out=ri.v_offsets[1:])
        padded = np.full((len(anchor), k), -1, dtype=np.int64)
        row = 0
        for b in parts:
            cnt = len(b["anchor"])
            for ci, c in enumerate(b["comps"]):
                padded[row : row + cnt, ci] = c
            row += cnt
        padded = padded[sort_key]
        ri.v_flat = padded[padded >= 0]
        ri.v_flat = np.ascontiguousarray(ri.v_flat, dtype=np.int64)
        ri._off_list = ri.v_offsets.tolist()
        ri._flat_list = ri.v_flat.tolist()
        ri._iota_list = ri.v_iota.tolist()
        ri._type_list = ri.v_type.tolist()
        bump(ri.v_count)

    # node -> containing tuple-node index (CSR) and the zeta stores
    counts = np.zeros(db.n + 1, dtype=np.int64)
    entries_node = []
    entries_v = []
    for i in range(ri.v_count):
        comps = set(ri.v_flat[ri.v_offsets[i] : ri.v_offsets[i + 1]].tolist())
        for c in comps:
            entries_node.append(c)
            entries_v.append(ri.n_a + i)
    bump(len(entries_node))
    en = np.array(entries_node, dtype=np.int64)
    ev = np.array(entries_v, dtype=np.int64)
    order = np.argsort(en, kind="stable")
    en = en[order]
    ev = ev[order]
    ri.cont_indptr = np.zeros(db.n + 1, dtype=np.int64)
    np.add.at(ri.cont_indptr, en + 1, 1)
    np.cumsum(ri.cont_indptr, out=ri.cont_indptr)
    ri.cont_data = ev

    n_key = max(db.n, len(ri.iotas) + 1)
    for s in range(1, k + 1):
        ri.zeta[s] = TupleStore(n_key, s + 1, epsilon)
    for i in range(ri.v_count):
        comps = tuple(ri.v_flat[ri.v_offsets[i] : ri.v_offsets[i + 1]].tolist())
        ri.zeta[len(comps)].insert(comps + (int(ri.v_iota[i]),), ri.n_a + i)
        bump()

    # satisfaction tables per partition
    ri.partitions = all_partitions(k)
    types_of_arity: dict[int, list[int]] = {}
    for tid, s in enumerate(ri.type_arity):
        types_of_arity.setdefault(s, []).append(tid)

    phi_const = None
    if isinstance(phi_local, TrueFormula):
        phi_const = True
    elif isinstance(phi_local, FalseFormula):
        phi_const = False

    for pi, part in enumerate(ri.partitions):
        sizes = [len(b) for b in part.blocks]
        pools = [types_of_arity.get(s, []) for s in sizes]
        combo_count = math.prod(len(p) for p in pools)
        if combo_count > sat_combo_cap:
            raise ResourceCapExceeded(
                f"{combo_count} type combinations exceed the satisfaction-table cap"
            )
        sat: set[tuple[int, ...]] = set()
        if phi_const is False:
            ri.sat[pi] = sat
            continue
        for combo in itertools.product(*pools):
            bump()
            if phi_const is True:
                sat.add(combo)
                continue
            if _combo_satisfies(ri, nbhd_r, rep_by_type, part, combo):
                sat.add(combo)
        ri.sat[pi] = sat

    _build_psi(ri)
    return ri


def _combo_satisfies(ri, nbhd_r, rep_by_type, part: Partition, combo) -> bool:
    """Evaluate the local formula on the disjoint union of type representatives."""
    nodes: list = []
    tuples: dict[str, list[tuple]] = {}
    adj: dict = {}
    assign: dict[str, int] = {}
    offset = 0
    mapping: dict = {}
    for j, (block, tid) in enumerate(zip(part.blocks, combo)):
        comps = rep_by_type[tid]
        struct = nbhd_r.local_of_tuple(comps)
        mapping.clear()
        for v in struct.nodes:
            mapping[v] = offset
            nodes.append(offset)
            offset += 1
        for name, rows in struct.tuples.items():
            tuples.setdefault(name, []).extend(
                tuple(mapping[c] for c in row) for row in rows
            )
        for v in struct.nodes:
            adj[mapping[v]] = [mapping[u] for u in struct.adj.get(v, ())]
        for pos, i in enumerate(block):
            assign[ri.variables[i - 1]] = mapping[comps[pos]]
    union = LocalStructure(tuple(nodes), tuples, adj)
    return eval_local(union, ri.phi_local, assign)


def _build_psi(ri: ReducedInstance) -> None:
    k = ri.k
    vs = ri.variables
    neg = [
        Not(RelAtom("E", (vs[i], vs[j])))
        for i in range(k)
        for j in range(k)
        if i != j
    ]
    ri.psi1 = join_and(neg)

    disjuncts: list[Formula] = []
    for pi, part in enumerate(ri.partitions):
        sat = ri.sat.get(pi, set())
        if not sat:
            continue
        base = [
            RelAtom(f"C_iota_{ri.iota_ids[block]}", (vs[j],))
            for j, block in enumerate(part.blocks)
        ]
        base += [RelAtom("C_bot", (vs[j],)) for j in range(len(part.blocks), k)]
        combos = [
            join_and([RelAtom(f"C_type_{tid}", (vs[j],)) for j, tid in enumerate(combo)])
            for combo in sorted(sat)
        ]
        disjuncts.append(And(join_and(base), join_or(combos)))
    psi2 = join_or(disjuncts)
    ri.psi2 = psi2
    if isinstance(psi2, FalseFormula):
        ri.psi = FALSE
    elif isinstance(ri.psi1, TrueFormula):
        ri.psi = psi2
    else:
        ri.psi = And(ri.psi1, psi2)


# ---------------------------------------------------------------------------
# graph view of the reduced instance


_COLOR_PREFIXES = ("C_bot", "C_iota_", "C_type_", "V_")


@functools.lru_cache(maxsize=None)
def parse_color(name: str):
    if name == "C_bot":
        return _BOT_KEY
    if name.startswith("C_iota_"):
        return ("iota", int(name[len("C_iota_") :]))
    if name.startswith("C_type_"):
        return ("type", int(name[len("C_type_") :]))
    if name.startswith("V_"):
        i, t = name[2:].split("_")
        return ("class", int(i), int(t))
    return None


class ReducedGraph:
    """GraphLike adapter over a ReducedInstance for the generic evaluators."""

    def __init__(self, ri: ReducedInstance, adjacency_cache_nodes: int = 50_000):
        self.ri = ri
        self._preds: dict[str, object] = {}
        self._member_lists: dict[str, list[int]] = {}
        self._member_sets: dict[str, frozenset] = {}
        self._adj_cache: dict[int, list[int]] = {}
        self._adj_cache_cap = adjacency_cache_nodes

    def domain(self):
        return range(self.ri.total)

    def domain_size(self):
        return self.ri.total

    def _predicate(self, name: str):
        pred = self._preds.get(name)
        if pred is not None:
            return pred
        ri = self.ri
        if name == "E":
            def pred(row):
                return ri.e_adjacent(row[0], row[1])
        elif name.startswith("F_"):
            i = int(name[2:])

            def pred(row):
                v, a = row
                bump()
                if not ri.is_tuple_node(v):
                    return False
                iota = ri.node_iota(v)
                if i not in iota:
                    return False
                return ri.node_tuple(v)[iota.index(i)] == a
        else:
            key = parse_color(name)
            if key is None:
                raise LowdegError(f"unknown relation {name!r} on the reduced graph")
            members = frozenset(ri.members(key).tolist())
            self._member_sets[name] = members

            def pred(row):
                bump()
                return row[0] in members
        self._preds[name] = pred
        return pred

    def has_fact(self, name: str, row) -> bool:
        return self._predicate(name)(row)

    def unary_members(self, name: str):
        cached = self._member_lists.get(name)
        if cached is None:
            key = parse_color(name)
            if key is None:
                raise LowdegError(f"{name!r} is not a color")
            cached = self.ri.members(key).tolist()
            self._member_lists[name] = cached
        return cached

    def unary_member_set(self, name: str) -> frozenset:
        self._predicate(name)
        return self._member_sets[name]

    def e_neighbors(self, u: int) -> list[int]:
        row = self._adj_cache.get(u)
        if row is None:
            row = self.ri.e_neighbors(u)
            if len(self._adj_cache) < self._adj_cache_cap:
                self._adj_cache[u] = row
        return row

    def candidates(self, name: str, args, env, target):
        ri = self.ri
        if name == "E":
            other = args[0] if args[1] == target else args[1]
            if other in env:
                return self.e_neighbors(env[other])
            return None
        if name.startswith("F_"):
            v_var, a_var = args
            if target == a_var and v_var in env:
                v = env[v_var]
                if not ri.is_tuple_node(v):
                    return []
                return list(set(ri.node_tuple(v)))
            if target == v_var and a_var in env:
                a = env[a_var]
                if not (0 <= a < ri.n_a):
                    return []
                lo, hi = ri.cont_indptr[a], ri.cont_indptr[a + 1]
                return ri.cont_data[lo:hi].tolist()
            return None
        return None

    def count_mask(self, literals) -> int | None:
        """Vectorized count of nodes satisfying unary literals on one variable."""
        ri = self.ri
        v_ok = np.ones(ri.v_count, dtype=bool)
        a_ok = True
        bot_ok = True
        for lit in literals:
            key = parse_color(lit.atom.name)
            if key is None:
                return None
            if key == _BOT_KEY:
                v_hit = np.zeros(ri.v_count, dtype=bool)
                a_hit = False
                bot_hit = True
            elif key[0] == "iota":
                v_hit = ri.v_iota == key[1]
                a_hit = False
                bot_hit = False
            elif key[0] == "type":
                v_hit = ri.v_type == key[1]
                a_hit = False
                bot_hit = False
            else:
                v_hit = (ri.v_iota == key[1]) & (ri.v_type == key[2])
                a_hit = False
                bot_hit = False
            if not lit.positive:
                v_hit = ~v_hit
                a_hit = not a_hit
                bot_hit = not bot_hit
            v_ok &= v_hit
            a_ok = a_ok and a_hit
            bot_ok = bot_ok and bot_hit
        total = int(v_ok.sum()) + (ri.n_a if a_ok else 0) + (1 if bot_ok else 0)
        bump(ri.v_count)
        return total


def dump_reduced(ri: ReducedInstance, path: str) -> None:
    """Write G as a fact file plus a sidecar mapping file for debugging."""
    lines = [f"domain {ri.total}"]
    lines.append(f"C_bot {ri.bot}")
    for i in range(ri.v_count):
        g = ri.n_a + i
        lines.append(f"C_iota_{int(ri.v_iota[i])} {g}")
        lines.append(f"C_type_{int(ri.v_type[i])} {g}")
        iota = ri.iotas[int(ri.v_iota[i])]
        comps = ri.node_tuple(g)
        for pos, target in enumerate(iota):
            lines.append(f"F_{target} {g} {comps[pos]}")
    for i in range(ri.v_count):
        g = ri.n_a + i
        for w in ri.e_neighbors(g):
            lines.append(f"E {g} {w}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(path + ".map", "w") as fh:
        for i in range(ri.v_count):
            g = ri.n_a + i
            comps = " ".join(str(c) for c in ri.node_tuple(g))
            iota = " ".join(str(t) for t in ri.iotas[int(ri.v_iota[i])])
            fh.write(f"{g} {int(ri.v_anchor[i])} {comps} {iota}\n")
