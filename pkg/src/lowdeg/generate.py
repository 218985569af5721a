"""Random databases with a bounded Gaifman degree, deterministic by seed.

Degree schedules: ``const:d`` (fixed bound), ``log_pow:c`` (ceil(log2 n)^c),
``poly:delta`` (ceil(n^delta)).  Binary relations are filled by proposing
random pairs and rejecting any that would push an endpoint over the bound;
unary relations are independent per-node coin flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LowdegError
from .model import Database, Signature


@dataclass(frozen=True)
class RelationSpec:
    name: str
    arity: int
    prob: float = 0.5  # unary membership probability; ignored for binary


DEFAULT_RELATIONS = (
    RelationSpec("E", 2),
    RelationSpec("B", 1, 0.5),
    RelationSpec("R", 1, 0.5),
)


def parse_schedule(text: str):
    kind, _, value = text.partition(":")
    if kind == "const":
        return ("const", int(value))
    if kind == "log_pow":
        return ("log_pow", float(value))
    if kind == "poly":
        return ("poly", float(value))
    raise LowdegError(f"unknown degree schedule {text!r}")


def degree_bound(schedule, n: int) -> int:
    kind, value = schedule if isinstance(schedule, tuple) else parse_schedule(schedule)
    if kind == "const":
        bound = int(value)
    elif kind == "log_pow":
        bound = math.ceil(math.log2(n)) ** value if n > 1 else 0
        bound = math.ceil(bound)
    else:
        bound = math.ceil(n**value)
    if bound < 0:
        raise LowdegError(f"infeasible degree schedule: bound {bound} < 0")
    return int(bound)


def parse_relation_spec(text: str) -> tuple[RelationSpec, ...]:
    """E.g. ``E:2,B:1:0.5,R:1:0.3``."""
    out = []
    for part in text.split(","):
        fields = part.strip().split(":")
        if len(fields) == 2:
            out.append(RelationSpec(fields[0], int(fields[1])))
        elif len(fields) == 3:
            out.append(RelationSpec(fields[0], int(fields[1]), float(fields[2])))
        else:
            raise LowdegError(f"bad relation spec {part!r}")
    return tuple(out)


def generate_database(
    n: int,
    schedule,
    relations: tuple[RelationSpec, ...] = DEFAULT_RELATIONS,
    seed: int = 0,
) -> Database:
    if n < 1:
        raise LowdegError("n must be >= 1")
    for spec in relations:
        if spec.arity > 2:
            raise LowdegError("generator supports arity <= 2 (load higher arities from files)")
    bound = degree_bound(schedule, n)
    rng = np.random.default_rng(seed)
    tuples: dict[str, list[tuple[int, ...]]] = {}
    degree = np.zeros(n, dtype=np.int64)
    for spec in relations:
        if spec.arity == 1:
            flags = rng.random(n) < spec.prob
            tuples[spec.name] = [(int(i),) for i in np.nonzero(flags)[0]]
            continue
        target = (n * bound) // 2
        picked: set[tuple[int, int]] = set()
        attempts = 0
        max_attempts = 6 * target + 64
        while len(picked) < target and attempts < max_attempts and bound > 0:
            batch = rng.integers(0, n, size=(max(64, target // 4), 2))
            for a, b in batch:
                attempts += 1
                a, b = int(a), int(b)
                if a == b or (a, b) in picked:
                    continue
                if degree[a] >= bound or degree[b] >= bound:
                    continue
                # a pair may re-use an endpoint pair in the other direction
                # without changing the Gaifman degree
                fresh_a = (b, a) not in picked
                picked.add((a, b))
                if fresh_a:
                    degree[a] += 1
                    degree[b] += 1
                if len(picked) >= target or attempts >= max_attempts:
                    break
        tuples[spec.name] = sorted(picked)
    signature = Signature(tuple((s.name, s.arity) for s in relations))
    return Database(n, signature, tuples)
