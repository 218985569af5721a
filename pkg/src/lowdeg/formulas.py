"""First-order query ASTs, the query grammar, and quantifier-free rewrites.

Grammar (ASCII): atoms ``R(x,...)``; ``dist(x,y) <= c`` and ``dist(x,y) > c``;
``!``, ``&``, ``|`` with precedence ``! > & > |``; ``exists v.`` / ``forall v.``
scope maximally rightward; relativized form ``exists v in N_r(x1,...,xm).``;
``true``/``false``; parentheses.  Answer-tuple component order is the
first-occurrence order of the free variables.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .errors import LowdegError, QuerySyntaxError, ResourceCapExceeded


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return format_query(self)


@dataclass(frozen=True)
class RelAtom(Formula):
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class DistAtom(Formula):
    x: str
    y: str
    op: str  # "<=" or ">"
    bound: int


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class RelativizedExists(Formula):
    """Existential quantifier ranging over the radius-ball of the centers."""

    var: str
    radius: int
    centers: tuple[str, ...]
    body: Formula


@dataclass(frozen=True)
class TrueFormula(Formula):
    pass


@dataclass(frozen=True)
class FalseFormula(Formula):
    pass


TRUE = TrueFormula()
FALSE = FalseFormula()

KEYWORDS = {"exists", "forall", "in", "dist", "true", "false"}


def free_vars(f: Formula) -> tuple[str, ...]:
    """Free variables in first-occurrence order (answer component order)."""
    out: list[str] = []

    def walk(node: Formula, bound: frozenset[str]):
        if isinstance(node, RelAtom):
            for v in node.args:
                if v not in bound and v not in out:
                    out.append(v)
        elif isinstance(node, DistAtom):
            for v in (node.x, node.y):
                if v not in bound and v not in out:
                    out.append(v)
        elif isinstance(node, Not):
            walk(node.sub, bound)
        elif isinstance(node, (And, Or)):
            walk(node.left, bound)
            walk(node.right, bound)
        elif isinstance(node, (Exists, Forall)):
            walk(node.body, bound | {node.var})
        elif isinstance(node, RelativizedExists):
            for v in node.centers:
                if v not in bound and v not in out:
                    out.append(v)
            walk(node.body, bound | {node.var})

    walk(f, frozenset())
    return tuple(out)


def relation_names(f: Formula) -> frozenset[str]:
    out: set[str] = set()

    def walk(node):
        if isinstance(node, RelAtom):
            out.add(node.name)
        elif isinstance(node, Not):
            walk(node.sub)
        elif isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (Exists, Forall, RelativizedExists)):
            walk(node.body)

    walk(f)
    return frozenset(out)


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (RelAtom, DistAtom, TrueFormula, FalseFormula)):
        return True
    if isinstance(f, Not):
        return is_quantifier_free(f.sub)
    if isinstance(f, (And, Or)):
        return is_quantifier_free(f.left) and is_quantifier_free(f.right)
    return False


_TOKEN = re.compile(
    r"\s*(?:(?P<lpar>\()|(?P<rpar>\))|(?P<not>!)|(?P<and>&)|(?P<or>\|)"
    r"|(?P<le><=)|(?P<gt>>)|(?P<dot>\.)|(?P<comma>,)"
    r"|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip():
                    raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
                break
            kind = m.lastgroup
            if kind is not None:
                self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def take(self, kind: str):
        tok = self.peek()
        if tok[0] != kind:
            raise QuerySyntaxError(f"expected {kind}, got {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.parse_or(frozenset())
        tok = self.peek()
        if tok[0] != "eof":
            raise QuerySyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return f

    def parse_or(self, bound: frozenset[str]) -> Formula:
        f = self.parse_and(bound)
        while self.peek()[0] == "or":
            self.take("or")
            f = Or(f, self.parse_and(bound))
        return f

    def parse_and(self, bound: frozenset[str]) -> Formula:
        f = self.parse_unary(bound)
        while self.peek()[0] == "and":
            self.take("and")
            f = And(f, self.parse_unary(bound))
        return f

    def parse_unary(self, bound: frozenset[str]) -> Formula:
        kind, value, pos = self.peek()
        if kind == "not":
            self.take("not")
            return Not(self.parse_unary(bound))
        if kind == "name" and value in ("exists", "forall"):
            return self.parse_quantifier(bound)
        return self.parse_atom(bound)

    def parse_quantifier(self, bound: frozenset[str]) -> Formula:
        kind, word, pos = self.take("name")
        vkind, var, vpos = self.take("name")
        if var in KEYWORDS:
            raise QuerySyntaxError(f"{var!r} is a reserved word", vpos)
        if var in bound:
            raise QuerySyntaxError(f"rebinding bound variable {var!r}", vpos)
        nxt = self.peek()
        if word == "exists" and nxt[0] == "name" and nxt[1] == "in":
            self.take("name")
            nkind, nname, npos = self.take("name")
            m = re.fullmatch(r"N_(\d+)", nname)
            if m is None:
                raise QuerySyntaxError(f"expected N_<radius>, got {nname!r}", npos)
            radius = int(m.group(1))
            self.take("lpar")
            centers = [self.take("name")[1]]
            while self.peek()[0] == "comma":
                self.take("comma")
                centers.append(self.take("name")[1])
            self.take("rpar")
            self.take("dot")
            body = self.parse_or(bound | {var})
            return RelativizedExists(var, radius, tuple(centers), body)
        self.take("dot")
        body = self.parse_or(bound | {var})
        return Exists(var, body) if word == "exists" else Forall(var, body)

    def parse_atom(self, bound: frozenset[str]) -> Formula:
        kind, value, pos = self.peek()
        if kind == "lpar":
            self.take("lpar")
            f = self.parse_or(bound)
            self.take("rpar")
            return f
        if kind == "name":
            if value == "true":
                self.take("name")
                return TRUE
            if value == "false":
                self.take("name")
                return FALSE
            if value == "dist":
                self.take("name")
                self.take("lpar")
                x = self.take("name")[1]
                self.take("comma")
                y = self.take("name")[1]
                self.take("rpar")
                op_tok = self.peek()
                if op_tok[0] == "le":
                    self.take("le")
                    op = "<="
                elif op_tok[0] == "gt":
                    self.take("gt")
                    op = ">"
                else:
                    raise QuerySyntaxError("expected <= or > after dist(...)", op_tok[2])
                c = int(self.take("int")[1])
                return DistAtom(x, y, op, c)
            self.take("name")
            if value in KEYWORDS:
                raise QuerySyntaxError(f"{value!r} is a reserved word", pos)
            self.take("lpar")
            args = [self.take("name")[1]]
            while self.peek()[0] == "comma":
                self.take("comma")
                args.append(self.take("name")[1])
            self.take("rpar")
            for a in args:
                if a in KEYWORDS:
                    raise QuerySyntaxError(f"{a!r} is a reserved word", pos)
            return RelAtom(value, tuple(args))
        raise QuerySyntaxError(f"unexpected token {value!r}", pos)


def parse_query(text: str) -> Formula:
    return _Parser(text).parse()


def join_and(parts: list[Formula]) -> Formula:
    """Balanced conjunction (keeps recursion depth logarithmic)."""
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return And(join_and(parts[:mid]), join_and(parts[mid:]))


def join_or(parts: list[Formula]) -> Formula:
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return Or(join_or(parts[:mid]), join_or(parts[mid:]))


def format_query(f: Formula) -> str:
    """Pretty-print so that ``parse_query(format_query(f))`` round-trips."""

    def go(node: Formula, level: int) -> str:
        # level: 0 = or-context, 1 = and-context, 2 = unary-context
        if isinstance(node, Or):
            s = f"{go(node.left, 0)} | {go(node.right, 1)}"
            return f"({s})" if level > 0 else s
        if isinstance(node, And):
            s = f"{go(node.left, 1)} & {go(node.right, 2)}"
            return f"({s})" if level > 1 else s
        if isinstance(node, Not):
            return f"!{go(node.sub, 3)}"
        if isinstance(node, Exists):
            s = f"exists {node.var}. {go(node.body, 0)}"
            return f"({s})" if level > 0 else s
        if isinstance(node, Forall):
            s = f"forall {node.var}. {go(node.body, 0)}"
            return f"({s})" if level > 0 else s
        if isinstance(node, RelativizedExists):
            centers = ",".join(node.centers)
            s = f"exists {node.var} in N_{node.radius}({centers}). {go(node.body, 0)}"
            return f"({s})" if level > 0 else s
        if isinstance(node, RelAtom):
            return f"{node.name}({','.join(node.args)})"
        if isinstance(node, DistAtom):
            return f"dist({node.x},{node.y}) {node.op} {node.bound}"
        if isinstance(node, TrueFormula):
            return "true"
        if isinstance(node, FalseFormula):
            return "false"
        raise LowdegError(f"cannot print {node!r}")

    return go(f, 0)


@dataclass(frozen=True)
class Literal:
    positive: bool
    atom: RelAtom

    def negate(self) -> "Literal":
        return Literal(not self.positive, self.atom)

    def __str__(self) -> str:
        return ("" if self.positive else "!") + format_query(self.atom)


@dataclass(frozen=True)
class GeneralizedConjunction:
    """Ordered conjunction of possibly negated relational atoms."""

    literals: tuple[Literal, ...]

    def variables(self) -> tuple[str, ...]:
        out: list[str] = []
        for lit in self.literals:
            for v in lit.atom.args:
                if v not in out:
                    out.append(v)
        return tuple(out)

    def to_formula(self) -> Formula:
        if not self.literals:
            return TRUE
        f: Formula | None = None
        for lit in self.literals:
            part: Formula = lit.atom if lit.positive else Not(lit.atom)
            f = part if f is None else And(f, part)
        return f

    def __str__(self) -> str:
        return " & ".join(str(lit) for lit in self.literals) if self.literals else "true"


@dataclass(frozen=True)
class QueryGraph:
    """Variables with co-occurrence edges from positive relational atoms."""

    vertices: tuple[str, ...]
    edges: frozenset[frozenset[str]]

    def components(self) -> list[tuple[str, ...]]:
        """Connected components, ordered by first variable occurrence."""
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            pair = tuple(e)
            if len(pair) == 2:
                adj[pair[0]].add(pair[1])
                adj[pair[1]].add(pair[0])
        seen: set[str] = set()
        comps = []
        for v in self.vertices:
            if v in seen:
                continue
            stack = [v]
            comp = []
            seen.add(v)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(tuple(x for x in self.vertices if x in set(comp)))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1


def query_graph(gamma: GeneralizedConjunction) -> QueryGraph:
    """Edges between variables co-occurring in a positive atom."""
    vertices = gamma.variables()
    edges: set[frozenset[str]] = set()
    for lit in gamma.literals:
        if not lit.positive:
            continue
        distinct = list(dict.fromkeys(lit.atom.args))
        for i in range(len(distinct)):
            for j in range(i + 1, len(distinct)):
                edges.add(frozenset((distinct[i], distinct[j])))
    return QueryGraph(vertices, frozenset(edges))


def _collect_atoms(f: Formula, out: list[RelAtom]):
    if isinstance(f, RelAtom):
        if f not in out:
            out.append(f)
    elif isinstance(f, Not):
        _collect_atoms(f.sub, out)
    elif isinstance(f, (And, Or)):
        _collect_atoms(f.left, out)
        _collect_atoms(f.right, out)
    elif isinstance(f, (TrueFormula, FalseFormula)):
        pass
    else:
        raise LowdegError(f"exclusive_dnf input must be quantifier-free relational, got {f}")


def _eval_row(f: Formula, row: dict[RelAtom, bool]) -> bool:
    if isinstance(f, RelAtom):
        return row[f]
    if isinstance(f, Not):
        return not _eval_row(f.sub, row)
    if isinstance(f, And):
        return _eval_row(f.left, row) and _eval_row(f.right, row)
    if isinstance(f, Or):
        return _eval_row(f.left, row) or _eval_row(f.right, row)
    if isinstance(f, TrueFormula):
        return True
    if isinstance(f, FalseFormula):
        return False
    raise LowdegError(f"cannot evaluate {f!r}")


def exclusive_dnf(psi: Formula, atom_cap: int = 20) -> list[GeneralizedConjunction]:
    """Mutually exclusive disjuncts: the satisfying full rows of the truth table.

    Any assignment satisfies ``psi`` iff it satisfies exactly one disjunct.
    """
    atoms: list[RelAtom] = []
    _collect_atoms(psi, atoms)
    if len(atoms) > atom_cap:
        raise ResourceCapExceeded(f"exclusive_dnf over {len(atoms)} atoms exceeds cap {atom_cap}")
    out = []
    for signs in itertools.product((True, False), repeat=len(atoms)):
        row = dict(zip(atoms, signs))
        if _eval_row(psi, row):
            out.append(GeneralizedConjunction(tuple(Literal(s, a) for a, s in zip(atoms, signs))))
    return out


def split_negated_binary(gamma: GeneralizedConjunction):
    """Peel the first negated non-unary literal.

    Returns (gamma1, gamma2) with gamma1 = gamma minus the literal and
    gamma2 = gamma1 plus its positive version, or None if no such literal.
    """
    for idx, lit in enumerate(gamma.literals):
        if not lit.positive and len(lit.atom.args) >= 2:
            rest = gamma.literals[:idx] + gamma.literals[idx + 1 :]
            g1 = GeneralizedConjunction(rest)
            g2 = GeneralizedConjunction(rest + (Literal(True, lit.atom),))
            return g1, g2
    return None
