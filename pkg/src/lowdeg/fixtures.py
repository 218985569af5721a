"""Hand fixtures and the engine-vs-oracle comparison corpus."""

from __future__ import annotations

from dataclasses import dataclass

from .counting import count_answers
from .enumeration import build_enumerator
from .errors import LowdegError
from .formulas import parse_query
from .generate import RelationSpec, generate_database
from .model import Database, Signature
from .oracle import naive_eval
from .reduction import eliminate_quantifiers
from .tester import build_tester


def db1() -> Database:
    """Six nodes; 1 and 2 blue, 4 and 5 red, one edge from 2 to 4."""
    sig = Signature((("B", 1), ("R", 1), ("E", 2)))
    return Database(6, sig, {"B": [(1,), (2,)], "R": [(4,), (5,)], "E": [(2, 4)]})


def c6() -> Database:
    """Directed 6-cycle."""
    sig = Signature((("E", 2),))
    return Database(6, sig, {"E": [(i, (i + 1) % 6) for i in range(6)]})


EXAMPLE_QUERY = "B(x) & R(y) & !E(x,y)"


@dataclass(frozen=True)
class CorpusCase:
    name: str
    db: Database
    query: str
    epsilon: float = 0.5


# query texts are paired with the degree of the databases they run on:
# the localization radius grows with quantifier nesting and with distance
# constants, and a saturated ball makes the reduced instance quadratic, so
# radius >= 1 queries stay on degree <= 2 inputs
_QUERIES_QF = [
    "B(x) & R(y) & !E(x,y)",
    "E(x,y)",
    "E(x,y) & !E(y,x)",
    "B(x) & B(y)",
    "B(x) & R(x)",
    "B(x) | R(x)",
    "E(x,y) | E(y,x)",
    "E(x,y) & E(y,z)",
    "B(x) & R(y) & B(z) & !E(x,y) & !E(y,z)",
    "E(x,y) & B(z) & !E(y,z) & !E(x,z)",
    "B(x)",
    "!B(x) & !R(x)",
]

_QUERIES_DEEP = [
    "exists y. E(x,y)",
    "exists y. E(x,y) & B(y)",
    "exists y. E(y,x) & R(y)",
    "exists y in N_2(x). R(y)",
    "exists y in N_1(x). exists z in N_1(y). E(y,z)",
    "(exists y. E(x,y) & B(y)) | B(x)",
    "!(exists y. E(x,y))",
    "B(x) & (exists y. E(x,y) & R(y))",
    "exists z. E(x,z) & E(z,y)",
    "B(x) & R(y) & !E(x,y) & (exists z. E(x,z))",
    "dist(x,y) <= 2",
    "B(x) & R(y) & dist(x,y) > 3",
    "!E(x,y) & !E(y,x) & dist(x,y) <= 2",
]

_QUERIES_SENTENCES = [
    "exists x. B(x)",
    "exists x. B(x) & !R(x)",
    "exists x. exists y. E(x,y) & B(x) & R(y)",
    "exists x. exists y. E(x,y) & E(y,x)",
    "(exists x. B(x)) & (exists y. R(y))",
]


def corpus(minimum: int = 200) -> list[CorpusCase]:
    """Deterministic engine-vs-oracle corpus of at least ``minimum`` cases."""
    cases: list[CorpusCase] = []
    for q in _QUERIES_QF + _QUERIES_DEEP + _QUERIES_SENTENCES:
        cases.append(CorpusCase(f"db1:{q}", db1(), q))
        if "B(" not in q and "R(" not in q:
            cases.append(CorpusCase(f"c6:{q}", c6(), q))
    rels = (RelationSpec("E", 2), RelationSpec("B", 1, 0.5), RelationSpec("R", 1, 0.4))
    seed = 0
    sizes_qf = [10, 14, 20, 27, 35, 44, 54, 66, 80]
    for n in sizes_qf:
        for d in (2, 3, 4):
            seed += 1
            dbr = generate_database(n, ("const", d), rels, seed=seed)
            # the three-variable conjunctions stay on the smaller inputs:
            # the exhaustive membership sweep is cubic in n
            queries = _QUERIES_QF if n <= 27 else _QUERIES_QF[:7]
            for q in queries[: 5 + (seed % 4)]:
                cases.append(CorpusCase(f"rand{n}d{d}s{seed}:{q}", dbr, q))
    sizes_deep = [10, 16, 24, 33, 44, 60, 80]
    for n in sizes_deep:
        seed += 1
        dbr = generate_database(n, ("const", 2), rels, seed=seed)
        for q in _QUERIES_DEEP:
            cases.append(CorpusCase(f"sparse{n}s{seed}:{q}", dbr, q))
        for q in _QUERIES_SENTENCES:
            cases.append(CorpusCase(f"sparse{n}s{seed}:{q}", dbr, q))
    if len(cases) < minimum:
        raise LowdegError(f"corpus built only {len(cases)} cases")
    return cases


@dataclass
class CaseResult:
    name: str
    ok: bool
    detail: str


def run_case(case: CorpusCase, test_samples: int = 0) -> CaseResult:
    """Compare count, membership tests, and the enumerated stream to the oracle."""
    phi = parse_query(case.query)
    expected = naive_eval(case.db, phi)
    ri = eliminate_quantifiers(case.db, phi, case.epsilon)

    got_count = count_answers(case.db, phi, case.epsilon, ri=ri)
    if got_count != len(expected):
        return CaseResult(case.name, False, f"count {got_count} != oracle {len(expected)}")

    emitted = list(build_enumerator(case.db, phi, case.epsilon, ri=ri))
    if len(emitted) != len(set(emitted)):
        return CaseResult(case.name, False, "enumeration emitted duplicates")
    if set(emitted) != expected:
        return CaseResult(case.name, False, "enumerated set differs from oracle")

    tester = build_tester(case.db, phi, case.epsilon, ri=ri)
    k = ri.k
    n = case.db.n
    if k == 0:
        if tester.test(()) != (() in expected):
            return CaseResult(case.name, False, "sentence test mismatch")
    elif n**k <= 64_000:
        import itertools

        for abar in itertools.product(range(n), repeat=k):
            if tester.test(abar) != (abar in expected):
                return CaseResult(case.name, False, f"test mismatch at {abar}")
    else:
        import random

        rng = random.Random(17)
        for _ in range(max(test_samples, 500)):
            abar = tuple(rng.randrange(n) for _ in range(k))
            if tester.test(abar) != (abar in expected):
                return CaseResult(case.name, False, f"test mismatch at {abar}")
        for abar in list(expected)[:100]:
            if not tester.test(abar):
                return CaseResult(case.name, False, f"answer {abar} rejected")
    return CaseResult(case.name, True, f"{len(expected)} answers")


def run_corpus(cases=None, progress=None) -> list[CaseResult]:
    results = []
    for case in cases if cases is not None else corpus():
        result = run_case(case)
        results.append(result)
        if progress is not None:
            progress(result)
    return results
