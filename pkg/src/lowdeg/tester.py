"""Constant-time membership tests after preprocessing.

A Tester compiles the quantifier-free query into a flat probe plan: every
distinct atom is evaluated exactly once per test (no early exit, so the work
per call is a fixed function of the query shape) and the boolean structure is
folded over the probe results.  Probes hit the closeness store and the color
arrays only, so a test never touches more than a constant number of cells.
"""

from __future__ import annotations

from .errors import LowdegError
from .formulas import (
    And,
    FalseFormula,
    Formula,
    Not,
    Or,
    RelAtom,
    TrueFormula,
)
from .instrument import bump
from .reduction import ReducedInstance, eliminate_quantifiers, parse_color


class Tester:
    """test(a-bar) iff a-bar is an answer of the preprocessed query."""

    def __init__(self, ri: ReducedInstance):
        self.ri = ri
        self.k = ri.k
        self._atoms: list[tuple] = []
        self._atom_index: dict = {}
        var_pos = {v: i for i, v in enumerate(ri.variables)}

        def compile_node(node: Formula):
            if isinstance(node, TrueFormula):
                return ("const", True)
            if isinstance(node, FalseFormula):
                return ("const", False)
            if isinstance(node, Not):
                return ("not", compile_node(node.sub))
            if isinstance(node, And):
                return ("and", compile_node(node.left), compile_node(node.right))
            if isinstance(node, Or):
                return ("or", compile_node(node.left), compile_node(node.right))
            if isinstance(node, RelAtom):
                if node.name == "E":
                    probe = ("E", var_pos[node.args[0]], var_pos[node.args[1]])
                else:
                    key = parse_color(node.name)
                    if key is None:
                        raise LowdegError(f"unexpected atom {node.name!r} in the reduced query")
                    probe = ("color", key, var_pos[node.args[0]])
                idx = self._atom_index.get(probe)
                if idx is None:
                    idx = len(self._atoms)
                    self._atoms.append(probe)
                    self._atom_index[probe] = idx
                return ("atom", idx)
            raise LowdegError(f"cannot compile {node!r}")

        self._plan = compile_node(ri.psi)

    def probe_count(self) -> int:
        return len(self._atoms)

    def test(self, abar) -> bool:
        ri = self.ri
        if len(abar) != self.k:
            raise LowdegError(f"expected a {self.k}-tuple, got {len(abar)} components")
        if self.k == 0:
            bump()
            return isinstance(ri.psi, TrueFormula)
        vbar = ri.apply_f(abar)
        values = []
        for probe in self._atoms:
            if probe[0] == "E":
                values.append(ri.e_adjacent(vbar[probe[1]], vbar[probe[2]]))
            else:
                values.append(ri.unary_holds(probe[1], vbar[probe[2]]))

        def fold(node) -> bool:
            kind = node[0]
            if kind == "const":
                return node[1]
            if kind == "atom":
                return values[node[1]]
            if kind == "not":
                return not fold(node[1])
            if kind == "and":
                return fold(node[1]) and fold(node[2])
            return fold(node[1]) or fold(node[2])

        return fold(self._plan)


def build_tester(db, phi: Formula, epsilon: float, *, ri: ReducedInstance | None = None) -> Tester:
    if ri is None:
        ri = eliminate_quantifiers(db, phi, epsilon)
    return Tester(ri)


def test(tester: Tester, abar) -> bool:
    return tester.test(abar)
