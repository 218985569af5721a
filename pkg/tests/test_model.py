from __future__ import annotations

import random

import pytest

from lowdeg.errors import FactFileError, LowdegError
from lowdeg.model import (
    INFINITE,
    Database,
    Signature,
    bounded_distance,
    format_database,
    gaifman_graph,
    load_database,
    neighborhoods,
)


def bfs_ball(adj_lists, start, radius):
    """Independent single-source BFS used as the neighborhood oracle."""
    seen = {start}
    frontier = [start]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for v in adj_lists[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return sorted(seen)


class TestLoad:
    def test_minimal(self):
        db = load_database("domain 3\nE 0 1\n")
        assert db.n == 3
        assert db.tuples["E"] == [(0, 1)]

    def test_duplicates_dropped(self):
        db = load_database("domain 2\nE 0 1\nE 0 1\n")
        assert len(db.tuples["E"]) == 1

    def test_component_out_of_domain(self):
        with pytest.raises(FactFileError, match="out of domain"):
            load_database("domain 2\nE 0 5\n")

    def test_declared_arity_mismatch(self):
        with pytest.raises(FactFileError, match="arity mismatch"):
            load_database("domain 3\n#rel E 2\nE 0 1 2\n")

    def test_inferred_arity_mismatch(self):
        with pytest.raises(FactFileError, match="arity mismatch"):
            load_database("domain 3\nE 0 1\nE 0 1 2\n")

    def test_comments_and_declarations(self):
        db = load_database("# a comment\n#rel E 2\ndomain 4\nE 0 1 # trailing\n")
        assert db.signature.arity("E") == 2
        assert db.tuples["E"] == [(0, 1)]

    def test_missing_domain(self):
        with pytest.raises(FactFileError):
            load_database("E 0 1\n")

    def test_roundtrip(self, db1):
        again = load_database(format_database(db1))
        assert again.n == db1.n
        assert again.tuples == db1.tuples


class TestGaifman:
    def test_ternary_clique(self):
        sig = Signature((("T", 3),))
        db = Database(4, sig, {"T": [(0, 1, 2)]})
        adj = gaifman_graph(db, {"T"})
        assert adj.neighbors(0) == [1, 2]
        assert adj.neighbors(1) == [0, 2]
        assert adj.neighbors(2) == [0, 1]
        assert adj.neighbors(3) == []

    def test_unary_only_is_edgeless(self):
        sig = Signature((("B", 1),))
        db = Database(3, sig, {"B": [(0,), (2,)]})
        adj = gaifman_graph(db, {"B"})
        assert all(adj.neighbors(a) == [] for a in range(3))

    def test_symmetry_collapses(self):
        sig = Signature((("E", 2),))
        db = Database(2, sig, {"E": [(0, 1), (1, 0)]})
        adj = gaifman_graph(db, {"E"})
        assert adj.neighbors(0) == [1]
        assert adj.neighbors(1) == [0]
        assert adj.degree() == 1

    def test_unknown_relation(self, db1):
        with pytest.raises(LowdegError, match="unknown relation"):
            gaifman_graph(db1, {"Z"})


class TestBoundedDistance:
    @pytest.fixture
    def path(self):
        sig = Signature((("E", 2),))
        return gaifman_graph(Database(3, sig, {"E": [(0, 1), (1, 2)]}), {"E"})

    def test_two_hops(self, path):
        assert bounded_distance(path, 0, 2, 2) == 2

    def test_bound_cutoff(self, path):
        assert bounded_distance(path, 0, 2, 1) is INFINITE

    def test_identity(self, path):
        assert bounded_distance(path, 1, 1, 0) == 0

    def test_symmetry(self):
        rng = random.Random(5)
        sig = Signature((("E", 2),))
        edges = {(rng.randrange(30), rng.randrange(30)) for _ in range(40)}
        db = Database(30, sig, {"E": sorted(e for e in edges if e[0] != e[1])})
        adj = gaifman_graph(db, {"E"})
        for _ in range(60):
            a, b, c = rng.randrange(30), rng.randrange(30), rng.randrange(4)
            assert bounded_distance(adj, a, b, c) == bounded_distance(adj, b, a, c)


class TestNeighborhoods:
    def test_c6_radius_one(self, c6):
        nbhd = neighborhoods(c6, {"E"}, 1)
        assert nbhd.ball(0) == [0, 1, 5]

    def test_c6_radius_three_covers_cycle(self, c6):
        nbhd = neighborhoods(c6, {"E"}, 3)
        adj = [nbhd.adj.neighbors(a) for a in range(6)]
        assert nbhd.ball(0) == bfs_ball(adj, 0, 3) == [0, 1, 2, 3, 4, 5]

    def test_isolated_node(self):
        sig = Signature((("E", 2),))
        db = Database(4, sig, {"E": []})
        nbhd = neighborhoods(db, {"E"}, 5)
        assert all(nbhd.ball(a) == [a] for a in range(4))

    def test_monotone_and_bounded(self, c6):
        prev = None
        d = max(2, gaifman_graph(c6, {"E"}).degree())
        for r in range(4):
            nbhd = neighborhoods(c6, {"E"}, r)
            for a in range(6):
                assert len(nbhd.ball(a)) < d ** (r + 1)
                if prev is not None:
                    assert set(prev.ball(a)) <= set(nbhd.ball(a))
            prev = nbhd

    def test_bfs_oracle_equivalence(self):
        rng = random.Random(11)
        n = 200
        edges = sorted({(rng.randrange(n), rng.randrange(n)) for _ in range(260)})
        sig = Signature((("E", 2),))
        db = Database(n, sig, {"E": [e for e in edges if e[0] != e[1]]})
        for r in (1, 2):
            nbhd = neighborhoods(db, {"E"}, r)
            adj = [nbhd.adj.neighbors(a) for a in range(n)]
            for a in range(n):
                assert nbhd.ball(a) == bfs_ball(adj, a, r)

    def test_induced_substructure(self, c6):
        nbhd = neighborhoods(c6, {"E"}, 1)
        local = nbhd.local(0)
        assert local.nodes == (0, 1, 5)
        assert sorted(local.tuples["E"]) == [(0, 1), (5, 0)]
