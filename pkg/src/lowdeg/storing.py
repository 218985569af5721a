"""Fixed-depth trie for k-tuple keys over [0,n), plus the per-relation fact index.

A key folds into the mixed-radix integer sum(a_i * n^(k-1-i)) and is split
into D = ceil(1/epsilon) digits, most significant first, over the alphabet
[0,B) with B the least integer satisfying B^D >= n^k.  Stores are write-once;
child maps are allocated lazily so the node count stays within entries*D + 1.
"""

from __future__ import annotations

import math

from .errors import LowdegError
from .instrument import bump


def _ceil_root(x: int, d: int) -> int:
    """Least B >= 1 with B**d >= x, exact integer arithmetic."""
    if x <= 1:
        return 1
    b = max(1, round(x ** (1.0 / d)))
    while b**d >= x:
        b -= 1
    while b**d < x:
        b += 1
    return b


class TupleStore:
    """Write-once map from k-tuples over [0,n) to values.

    ``node_visits`` counts trie nodes touched by lookups (for the
    constant-lookup assertions); the global step counter gets one bump per
    lookup call, matching the engine's primitive-operation accounting.
    """

    def __init__(self, n: int, k: int, epsilon: float):
        if epsilon <= 0:
            raise LowdegError("epsilon must be positive")
        if k < 1:
            raise LowdegError("key arity must be >= 1")
        if n < 1:
            raise LowdegError("domain bound must be >= 1")
        self.n = n
        self.k = k
        self.epsilon = epsilon
        # tolerance keeps ceil(1/eps) exact for eps like 0.25 stored as floats
        self.depth = math.ceil(1.0 / epsilon - 1e-12)
        self.branching = _ceil_root(n**k, self.depth)
        self._powers = [self.branching**i for i in range(self.depth - 1, -1, -1)]
        self._key_powers = [n**i for i in range(k - 1, -1, -1)]
        self._root: dict = {}
        self.node_count = 1  # the root
        self.entry_count = 0
        self.node_visits = 0

    def _fold(self, key) -> int:
        if len(key) != self.k:
            raise LowdegError(f"key arity {len(key)} != {self.k}")
        total = 0
        for c, p in zip(key, self._key_powers):
            if not (0 <= c < self.n):
                raise LowdegError(f"component {c} out of range [0,{self.n})")
            total += c * p
        return total

    def digits(self, key) -> tuple[int, ...]:
        folded = self._fold(key)
        return tuple((folded // p) % self.branching for p in self._powers)

    def insert(self, key, value) -> None:
        if value is None:
            raise LowdegError("cannot store None")
        digs = self.digits(key)
        node = self._root
        for d in digs[:-1]:
            child = node.get(d)
            if child is None:
                child = {}
                node[d] = child
                self.node_count += 1
            node = child
        last = digs[-1]
        if last in node:
            raise LowdegError(f"duplicate key {tuple(key)}")
        node[last] = value
        self.entry_count += 1

    def lookup(self, key):
        """Stored value, or None when the key is absent; visits <= depth+1 nodes."""
        bump()
        digs = self.digits(key)
        node = self._root
        self.node_visits += 1
        for d in digs[:-1]:
            node = node.get(d)
            if node is None:
                return None
            self.node_visits += 1
        value = node.get(digs[-1])
        if value is not None:
            self.node_visits += 1
        return value


def build_store(entries, n: int, k: int, epsilon: float) -> TupleStore:
    """Store exactly the given (key, value) pairs; keys must be distinct."""
    store = TupleStore(n, k, epsilon)
    for key, value in entries:
        store.insert(key, value)
    return store


class FactIndex:
    """One TupleStore per relation; lookup(R, a-bar) iff the fact is present."""

    def __init__(self, stores: dict[str, TupleStore], arities: dict[str, int]):
        self._stores = stores
        self._arities = arities

    def lookup(self, name: str, row) -> bool:
        store = self._stores.get(name)
        if store is None:
            raise LowdegError(f"unknown relation {name!r}")
        if len(row) != self._arities[name]:
            raise LowdegError(f"arity mismatch for {name}")
        return store.lookup(row) is not None

    def store(self, name: str) -> TupleStore:
        return self._stores[name]


def build_fact_index(db, epsilon: float) -> FactIndex:
    stores = {}
    arities = {}
    for name, arity in db.signature.relations:
        store = TupleStore(db.n, arity, epsilon)
        for row in db.tuples[name]:
            store.insert(row, True)
        stores[name] = store
        arities[name] = arity
    return FactIndex(stores, arities)
