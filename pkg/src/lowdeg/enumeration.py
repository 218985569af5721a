"""Constant-delay enumeration over the reduced colored graph.

The quantifier-free query splits into mutually exclusive blocks, one per
color profile of the last position.  Each block walks an ordered color list
with a precomputed skip function that jumps over nodes conflicting with the
current prefix; prefixes come from the same machinery one arity down, and
arity-1 prefix lists are filtered at build time so every prefix extends.

skip(y, V) is the first node z >= y in the color list with no closeness edge
to any node of V.  When no node of V is adjacent to y the answer is y itself,
so only conflicted keys are stored; their number is bounded by the adjacency
rows of the color list, which keeps the store pseudo-linear.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, LowdegError, SkipDomainOverflow
from .formulas import FalseFormula, Formula, TrueFormula
from .instrument import bump
from .reduction import ReducedInstance, eliminate_quantifiers
from .storing import TupleStore


@dataclass
class EnumConfig:
    epsilon: float = 0.5
    skip_entry_cap: int = 6_000_000
    skip_subset_cap: int = 2**20
    strict_skip_domain: bool = False  # raise instead of falling back to lazy skips
    closeness_node_cap: int = 600
    closeness_edge_cap: int = 200_000


def _profile_key(profile: tuple):
    return profile


def _rows_of_instance(ri: ReducedInstance) -> list[tuple]:
    rows = []
    for pi, part in enumerate(ri.partitions):
        ell = len(part.blocks)
        for combo in sorted(ri.sat.get(pi, ())):
            row = tuple(
                ("class", ri.iota_ids[block], combo[j]) for j, block in enumerate(part.blocks)
            ) + (("bot",),) * (ri.k - ell)
            rows.append(row)
    return sorted(set(rows))


class ColorList:
    """Sorted node list of one color class with positional successor."""

    def __init__(self, ids: np.ndarray):
        self.ids = ids
        self.pos = {int(v): i for i, v in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def first(self):
        bump()
        return int(self.ids[0]) if len(self.ids) else None

    def next(self, z: int):
        bump()
        i = self.pos[z] + 1
        return int(self.ids[i]) if i < len(self.ids) else None


class ClosenessIndex:
    """Reachable-conflict relations E_1..E_m over the expanded graph.

    The expansion adds the color-list membership and its successor relation;
    a pair enters E_{i+1} when it is in E_i or reachable through one
    adjacency step, one successor step, and another adjacency step.
    """

    def __init__(self, ri: ReducedInstance, color_list: ColorList, m: int, edge_cap: int | None = None):
        self.ri = ri
        self.color_list = color_list
        self.m = m
        first = ri.n_a
        nodes = list(range(first, first + ri.v_count)) + [ri.bot]
        self.adj: dict[int, list[int]] = {}
        edges = 0
        for u in nodes:
            row = ri.e_neighbors(u)
            edges += len(row)
            if edge_cap is not None and edges > edge_cap:
                raise LowdegError("reachable-conflict index over the edge budget")
            self.adj[u] = row
        ids = color_list.ids
        self.pred: dict[int, int] = {
            int(ids[i + 1]): int(ids[i]) for i in range(len(ids) - 1)
        }
        rows = {u: frozenset(self.adj[u]) for u in nodes}
        self.levels: list[dict[int, frozenset]] = [rows]
        for _ in range(m - 1):
            prev = self.levels[-1]
            nxt: dict[int, frozenset] = {}
            for u in nodes:
                acc = set(prev[u])
                for z in self.adj[u]:
                    zp = self.pred.get(z)
                    if zp is None:
                        continue
                    for v in self.adj[zp]:
                        acc.update(prev[v])
                nxt[u] = frozenset(acc)
            self.levels.append(nxt)
        self.inverse_top: dict[int, set[int]] = {}
        for u, row in self.levels[-1].items():
            for y in row:
                self.inverse_top.setdefault(y, set()).add(u)

    def related(self, i: int, u: int, y: int) -> bool:
        bump()
        return y in self.levels[i - 1].get(u, ())

    def pairs(self, i: int) -> set[tuple[int, int]]:
        return {(u, y) for u, row in self.levels[i - 1].items() for y in row}

    def expanded_distance_at_most(self, u: int, y: int, bound: int) -> bool:
        """BFS distance in the expansion (adjacency plus successor edges)."""
        if u == y:
            return True
        seen = {u}
        frontier = [u]
        succ = {p: z for z, p in self.pred.items()}
        for _ in range(bound):
            nxt = []
            for a in frontier:
                hops = list(self.adj.get(a, []))
                if a in self.pred:
                    hops.append(self.pred[a])
                if a in succ:
                    hops.append(succ[a])
                for b in hops:
                    if b == y:
                        return True
                    if b not in seen:
                        seen.add(b)
                        nxt.append(b)
            if not nxt:
                return False
            frontier = nxt
        return False


_NO_NODE = object()


class SkipIndex:
    """skip(y, V): first z >= y in the color list avoiding every node of V."""

    def __init__(
        self,
        ri: ReducedInstance,
        color_list: ColorList,
        m: int,
        config: EnumConfig,
        prefix_mask: np.ndarray | None = None,
        closeness: ClosenessIndex | None = None,
    ):
        self.ri = ri
        self.color_list = color_list
        self.m = m
        self.config = config
        self.store: TupleStore | None = None
        self.memo: dict = {}
        self.mode = "lazy"
        if len(color_list) == 0:
            return
        if m == 2:
            self._build_eager_pairs(prefix_mask)
        elif closeness is not None:
            self._build_eager_subsets(closeness)

    def _new_store(self) -> TupleStore:
        return TupleStore(self.ri.total + 1, self.m + 1, self.config.epsilon)

    def _key(self, y: int, conflict_set: tuple[int, ...]):
        pad = self.ri.total
        padded = conflict_set + (pad,) * (self.m - 1 - len(conflict_set))
        return (y, len(conflict_set)) + padded

    def _build_eager_pairs(self, prefix_mask) -> None:
        store = self._new_store()
        sentinel = self.ri.total
        entries = 0
        for y_raw in self.color_list.ids:
            y = int(y_raw)
            for v in self.ri.e_neighbors(y):
                if prefix_mask is not None and not prefix_mask[v]:
                    continue
                z = self.scan(y, (v,))
                store.insert(self._key(y, (v,)), sentinel if z is None else z)
                entries += 1
                if entries > self.config.skip_entry_cap:
                    return  # fall back to lazy computation
        self.store = store
        self.mode = "eager"

    def _build_eager_subsets(self, closeness: ClosenessIndex) -> None:
        import math

        store = self._new_store()
        sentinel = self.ri.total
        entries = 0
        for y_raw in self.color_list.ids:
            y = int(y_raw)
            related = sorted(closeness.inverse_top.get(y, ()))
            adjacent = {v for v in related if self.ri.e_adjacent(v, y)}
            if not adjacent:
                continue
            quiet = len(related) - len(adjacent)
            count = sum(
                math.comb(len(related), size) - math.comb(quiet, size)
                for size in range(1, self.m)
            )
            if count > self.config.skip_subset_cap:
                if self.config.strict_skip_domain:
                    raise SkipDomainOverflow(y, count, self.config.skip_subset_cap)
                return  # keep the lazy mode
            for size in range(1, self.m):
                for V in itertools.combinations(related, size):
                    if not any(v in adjacent for v in V):
                        continue
                    z = self.scan(y, V)
                    store.insert(self._key(y, V), sentinel if z is None else z)
                    entries += 1
                    if entries > self.config.skip_entry_cap:
                        return
        self.store = store
        self.mode = "eager"

    def scan(self, y: int, conflicts: tuple[int, ...]):
        """Reference walk: advance through the list until nothing conflicts."""
        i = self.color_list.pos[y]
        ids = self.color_list.ids
        while i < len(ids):
            bump()
            z = int(ids[i])
            if all(not self.ri.e_adjacent(v, z) for v in conflicts):
                return z
            i += 1
        return None

    def query(self, y: int, conflicts: tuple[int, ...]):
        bump()
        if not conflicts:
            return y
        if all(not self.ri.e_adjacent(v, y) for v in conflicts):
            return y
        if self.mode == "eager":
            value = self.store.lookup(self._key(y, conflicts))
            if value is None:
                raise ContractViolation(f"skip key ({y}, {conflicts}) outside precomputed domain")
            return None if value == self.ri.total else int(value)
        cached = self.memo.get((y, conflicts), _NO_NODE)
        if cached is not _NO_NODE:
            bump()
            return cached
        value = self.scan(y, conflicts)
        self.memo[(y, conflicts)] = value
        return value


def skip(index: SkipIndex, y: int, conflict_set) -> int | None:
    """Spec-shaped entry point for one skip query."""
    return index.query(y, tuple(sorted(conflict_set)))


class ThetaBlock:
    """One mutually exclusive block: prefix query, last-position color, machinery."""

    def __init__(self, ri: ReducedInstance, last_profile: tuple, sub_rows: list[tuple], m: int, config: EnumConfig):
        self.ri = ri
        self.m = m
        self.last_profile = last_profile
        self.sub_rows = sub_rows
        self.color_list = ColorList(ri.members(_color_key(last_profile)))
        self.config = config
        self.closeness: ClosenessIndex | None = None
        self.skip: SkipIndex | None = None

    def prepare(self) -> bool:
        """Build the block machinery; False if the block cannot produce answers."""
        if len(self.color_list) == 0:
            return False
        prefix_mask = None
        if self.m == 2:
            prefix_mask = np.zeros(self.ri.total, dtype=bool)
            for row in self.sub_rows:
                prefix_mask[self.ri.members(_color_key(row[0]))] = True
            if not prefix_mask.any():
                return False
        if self.m >= 3 and self.ri.v_count <= self.config.closeness_node_cap:
            try:
                self.closeness = ClosenessIndex(
                    self.ri, self.color_list, self.m, self.config.closeness_edge_cap
                )
            except LowdegError:
                self.closeness = None  # unfiltered conflicts + lazy skips stay correct
        self.skip = SkipIndex(
            self.ri, self.color_list, self.m, self.config, prefix_mask, self.closeness
        )
        return True

    def select_conflicts(self, prefix: tuple[int, ...], y: int) -> tuple[int, ...]:
        comps = sorted({u for u in prefix if self.ri.is_tuple_node(u)})
        bump(len(prefix))
        if self.closeness is not None:
            comps = [u for u in comps if self.closeness.related(self.m, u, y)]
        return tuple(comps)

    def run(self, prefix_stream):
        first = self.color_list.first()
        for prefix in prefix_stream:
            y = first
            while y is not None:
                V = self.select_conflicts(prefix, y)
                z = self.skip.query(y, V)
                if z is None:
                    break
                yield prefix + (z,)
                y = self.color_list.next(z)


def _color_key(profile: tuple):
    if profile == ("bot",):
        return ("bot",)
    return ("class", profile[1], profile[2])


def _shape_stream(ri: ReducedInstance, rows: list[tuple], m: int, config: EnumConfig):
    """Enumerate node tuples satisfying (some row's profiles) and pairwise
    non-adjacency, blocks sequentially."""
    if m == 1:
        def singles():
            for profile in sorted({row[0] for row in rows}):
                members = ri.members(_color_key(profile))
                for v in members:
                    bump()
                    yield (int(v),)

        return singles()

    def blocks():
        grouped: dict[tuple, list[tuple]] = {}
        for row in rows:
            grouped.setdefault(row[-1], []).append(row[:-1])
        for last_profile in sorted(grouped):
            sub_rows = sorted(set(grouped[last_profile]))
            block = ThetaBlock(ri, last_profile, sub_rows, m, config)
            if not block.prepare():
                continue
            if m == 2:
                prefix_iter = _filtered_green_list(ri, block, sub_rows)
            else:
                prefix_iter = _shape_stream(ri, sub_rows, m - 1, config)
            yield from block.run(prefix_iter)

    return blocks()


def _filtered_green_list(ri: ReducedInstance, block: ThetaBlock, sub_rows: list[tuple]):
    """Arity-1 prefixes that have at least one extension in this block."""
    first = block.color_list.first()
    for profile in sorted({row[0] for row in sub_rows}):
        for v_raw in ri.members(_color_key(profile)):
            v = int(v_raw)
            V = block.select_conflicts((v,), first)
            if block.skip.query(first, V) is not None:
                yield (v,)


class Enumerator:
    """Cursor over the answers of the preprocessed query, duplicate-free.

    Iterating yields answer tuples of the original database; ``next()``
    returns None when exhausted.  The cursor is exclusively owned mutable
    state; the underlying indexes are immutable and shareable.
    """

    def __init__(self, ri: ReducedInstance, config: EnumConfig | None = None):
        self.ri = ri
        self.config = config or EnumConfig(epsilon=ri.epsilon)
        k = ri.k
        if k == 0:
            self._stream = iter([()]) if isinstance(ri.psi, TrueFormula) else iter(())
        elif isinstance(ri.psi, FalseFormula):
            self._stream = iter(())
        else:
            rows = _rows_of_instance(ri)
            self._stream = _shape_stream(ri, rows, k, self.config) if rows else iter(())

    def __iter__(self):
        return self

    def __next__(self):
        vbar = next(self._stream)
        if self.ri.k == 0:
            return vbar
        abar = self.ri.apply_f_inverse(vbar)
        if abar is None:
            raise ContractViolation(f"enumerated tuple {vbar} is outside the encoded answer set")
        return abar

    def next(self):
        try:
            return next(self)
        except StopIteration:
            return None


def build_enumerator(
    db,
    phi: Formula,
    epsilon: float,
    *,
    ri: ReducedInstance | None = None,
    config: EnumConfig | None = None,
) -> Enumerator:
    if ri is None:
        ri = eliminate_quantifiers(db, phi, epsilon)
    if config is None:
        config = EnumConfig(epsilon=epsilon)
    return Enumerator(ri, config)
