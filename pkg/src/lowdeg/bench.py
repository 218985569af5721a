"""Instrumented benchmark harness: preprocessing and per-operation step counts.

Reports come from the shared abstract step counter (wall-clock is recorded
for orientation only).  Enumerate mode caps the emitted stream with a limit
but reports the exact answer count from the counting engine, so scaling
checks can watch the count grow while delay statistics stay finite.
"""

from __future__ import annotations

import random
import time

from .counting import count_answers
from .enumeration import EnumConfig, Enumerator, build_enumerator
from .errors import LowdegError
from .formulas import parse_query
from .instrument import read
from .model import Database, gaifman_graph
from .reduction import eliminate_quantifiers
from .tester import build_tester

BENCH_KEYS = (
    "n",
    "d",
    "epsilon",
    "mode",
    "prep_steps",
    "prep_wall_ms",
    "per_op_steps",
    "answers",
)


def run_bench(
    db: Database,
    query: str,
    epsilon: float,
    mode: str,
    *,
    limit: int = 20_000,
    samples: int = 50,
    seed: int = 0,
) -> dict:
    if mode not in ("count", "test", "enumerate"):
        raise LowdegError(f"unknown bench mode {mode!r}")
    phi = parse_query(query)
    degree = gaifman_graph(db, db.signature.names()).degree()

    t0 = time.perf_counter()
    s0 = read()
    ri = eliminate_quantifiers(db, phi, epsilon)
    qe_steps = read() - s0
    report: dict = {
        "n": db.n,
        "d": degree,
        "epsilon": epsilon,
        "mode": mode,
        "answers": None,
        "per_op_steps": {"max": 0, "mean": 0.0},
    }

    if mode == "count":
        before = read()
        count = count_answers(db, phi, epsilon, ri=ri)
        op = read() - before
        prep_steps = qe_steps + op
        report["answers"] = count
        report["per_op_steps"] = {"max": op, "mean": float(op)}
    elif mode == "test":
        tester = build_tester(db, phi, epsilon, ri=ri)
        prep_steps = read() - s0
        rng = random.Random(seed)
        deltas = []
        hits = 0
        for _ in range(samples):
            abar = tuple(rng.randrange(db.n) for _ in range(ri.k))
            before = read()
            if tester.test(abar):
                hits += 1
            deltas.append(read() - before)
        report["answers"] = hits
        if deltas:
            report["per_op_steps"] = {"max": max(deltas), "mean": sum(deltas) / len(deltas)}
    else:
        config = EnumConfig(epsilon=epsilon)
        enum = build_enumerator(db, phi, epsilon, ri=ri, config=config)
        prep_steps = read() - s0
        deltas = []
        emitted = 0
        while emitted < limit:
            before = read()
            answer = enum.next()
            delta = read() - before
            if answer is None:
                break
            deltas.append(delta)
            emitted += 1
        report["answers"] = count_answers(db, phi, epsilon, ri=ri)
        report["enumerated"] = emitted
        report["max_delay_steps"] = max(deltas) if deltas else 0
        report["mean_delay_steps"] = sum(deltas) / len(deltas) if deltas else 0.0
        if deltas:
            report["per_op_steps"] = {"max": max(deltas), "mean": sum(deltas) / len(deltas)}

    report["prep_steps"] = prep_steps
    report["prep_wall_ms"] = (time.perf_counter() - t0) * 1000.0
    return report
