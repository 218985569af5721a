"""Abstract step counter shared by all engine primitives.

Wall-clock is too noisy to assert constancy claims, so every engine primitive
(store lookup, closeness probe, comparison in a scan, list advance) bumps one
global counter.  Vectorized passes bump once per element.  The bench harness
and the acceptance suite read deltas around the operations they measure.
"""

from __future__ import annotations


class StepCounter:
    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0


STEPS = StepCounter()


def bump(n: int = 1) -> None:
    STEPS.count += n


def read() -> int:
    return STEPS.count


class track:
    """Context manager capturing the step delta of a block."""

    __slots__ = ("start", "steps")

    def __enter__(self) -> "track":
        self.start = STEPS.count
        self.steps = 0
        return self

    def __exit__(self, *exc) -> None:
        self.steps = STEPS.count - self.start
