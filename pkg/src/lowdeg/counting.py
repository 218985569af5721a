"""Exact answer counting over the reduced colored graph.

A generalized conjunction is counted by peeling negated non-unary atoms
(count = count without the literal minus count with it positive) until only
positive atoms and negated unary atoms remain; the rest factors over the
connected components of the query graph, each component answered by the
connected-conjunction evaluator.  Per-component counts are memoized on the
literal multiset since the plus/minus recursion revisits shared subqueries.
"""

from __future__ import annotations

import math

from .errors import LowdegError
from .formulas import (
    FalseFormula,
    Formula,
    GeneralizedConjunction,
    Literal,
    RelAtom,
    TrueFormula,
    query_graph,
    split_negated_binary,
)
from .instrument import bump
from .localeval import ConnectedCQ, eval_connected_cq
from .reduction import ReducedGraph, ReducedInstance, eliminate_quantifiers


def count_gen_conjunction(graph, gamma: GeneralizedConjunction, memo: dict | None = None) -> int:
    """|gamma(G)| by the negated-atom recursion and component factorization."""
    if memo is None:
        memo = {}
    key = gamma.literals
    cached = memo.get(key)
    if cached is not None:
        return cached

    split = split_negated_binary(gamma)
    if split is not None:
        g1, g2 = split
        value = count_gen_conjunction(graph, g1, memo) - count_gen_conjunction(graph, g2, memo)
        memo[key] = value
        return value

    graph_q = query_graph(gamma)
    if not gamma.literals:
        memo[key] = 1
        return 1
    value = 1
    for comp in graph_q.components():
        comp_set = set(comp)
        lits = tuple(l for l in gamma.literals if set(l.atom.args) <= comp_set)
        value *= _count_component(graph, comp, lits, memo)
        if value == 0:
            break
    memo[key] = value
    return value


def _count_component(graph, variables, literals, memo) -> int:
    key = ("component", literals)
    cached = memo.get(key)
    if cached is not None:
        return cached
    if len(variables) == 1 and all(len(l.atom.args) == 1 for l in literals):
        counter = getattr(graph, "count_mask", None)
        value = counter(literals) if counter is not None else None
        if value is None:
            value = 0
            for a in graph.domain():
                bump()
                if all(graph.has_fact(l.atom.name, (a,)) == l.positive for l in literals):
                    value += 1
    else:
        cq = ConnectedCQ(tuple(variables), (), GeneralizedConjunction(literals))
        value = len(eval_connected_cq(graph, cq))
    memo[key] = value
    return value


def _instance_rows(ri: ReducedInstance) -> list[GeneralizedConjunction]:
    """Mutually exclusive disjuncts equivalent to psi on the reduced graph.

    One disjunct per (partition, satisfying type combination): class
    predicates pin each position's slot-map and type (node classes partition
    the domain, so distinct rows are disjoint), and the non-adjacency
    conjunct carries over unchanged.
    """
    vs = ri.variables
    k = ri.k
    neg_e = tuple(
        Literal(False, RelAtom("E", (vs[i], vs[j])))
        for i in range(k)
        for j in range(k)
        if i != j
    )
    rows = []
    for pi, part in enumerate(ri.partitions):
        for combo in sorted(ri.sat.get(pi, ())):
            lits = []
            for j, block in enumerate(part.blocks):
                lits.append(Literal(True, RelAtom(f"V_{ri.iota_ids[block]}_{combo[j]}", (vs[j],))))
            for j in range(len(part.blocks), k):
                lits.append(Literal(True, RelAtom("C_bot", (vs[j],))))
            rows.append(GeneralizedConjunction(tuple(lits) + neg_e))
    return rows


def count_answers(db, phi: Formula, epsilon: float, *, ri: ReducedInstance | None = None) -> int:
    """|phi(A)|: eliminate quantifiers, then sum the exclusive disjunct counts."""
    if ri is None:
        ri = eliminate_quantifiers(db, phi, epsilon)
    if ri.k == 0:
        return 1 if isinstance(ri.psi, TrueFormula) else 0
    if isinstance(ri.psi, FalseFormula):
        return 0
    graph = ReducedGraph(ri)
    memo: dict = {}
    total = 0
    for row in _instance_rows(ri):
        total += count_gen_conjunction(graph, row, memo)
    if total < 0:
        raise LowdegError("negative count: counting recursion is inconsistent")
    return total
