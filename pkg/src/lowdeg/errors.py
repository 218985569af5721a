"""Exception hierarchy shared by all engine modules."""

from __future__ import annotations


class LowdegError(Exception):
    """Base class for every error raised by this package."""


class FactFileError(LowdegError):
    """Malformed fact file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class QuerySyntaxError(LowdegError):
    """Malformed query text; carries the character position."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"at position {pos}: {message}"
        super().__init__(message)


class UnsupportedFragment(LowdegError):
    """Query lies outside the automatically localizable fragment."""

    def __init__(self, message: str, offending=None):
        self.offending = offending
        if offending is not None:
            message = f"{message}: {offending}"
        super().__init__(message)


class ResourceCapExceeded(LowdegError):
    """A configurable resource guard tripped (exit code 4 on the CLI)."""


class NeighborhoodTooLarge(ResourceCapExceeded):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"neighborhood has {size} nodes, canonicalization cap is {cap}")


class SkipDomainOverflow(ResourceCapExceeded):
    def __init__(self, node, subsets: int, cap: int):
        super().__init__(f"skip domain at node {node} needs {subsets} conflict sets, cap is {cap}")


class ContractViolation(LowdegError):
    """Internal invariant broke; signals a pipeline bug, not a user error."""
