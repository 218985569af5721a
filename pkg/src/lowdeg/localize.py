"""Restricted localizer: rewrite supported queries into radius-bounded form.

Supported fragment:
  (a) quantifier-free formulas (radius = largest distance-atom constant);
  (b) boolean combinations of existential-prefix conjunctions of literals,
      localized per query-graph component: positive relational atoms and
      dist<=c atoms connect variables, and each component with free variables
      becomes a block of neighborhood-relativized quantifiers of radius
      #vars * max(1, largest distance constant), while components without
      free variables become single-witness scattered sentences;
  (c) formulas already written with relativized quantifiers throughout.

A negated non-unary atom or a dist>c atom whose variables span two components
cannot be localized component-wise and is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnsupportedFragment
from .formulas import (
    And,
    DistAtom,
    Exists,
    FalseFormula,
    Forall,
    Formula,
    Not,
    Or,
    RelAtom,
    RelativizedExists,
    TrueFormula,
    TRUE,
    FALSE,
    format_query,
    free_vars,
    is_quantifier_free,
)
from .localeval import BasicLocalSentence, check_basic_local


@dataclass(frozen=True)
class SkelLeaf:
    formula: Formula
    radius: int


@dataclass(frozen=True)
class SkelSentence:
    sentence: BasicLocalSentence


@dataclass(frozen=True)
class SkelConst:
    value: bool


@dataclass(frozen=True)
class SkelNot:
    child: object


@dataclass(frozen=True)
class SkelAnd:
    left: object
    right: object


@dataclass(frozen=True)
class SkelOr:
    left: object
    right: object


@dataclass(frozen=True)
class LocalizedQuery:
    free: tuple[str, ...]
    radius: int
    skeleton: object

    def sentences(self) -> list[BasicLocalSentence]:
        out = []

        def walk(node):
            if isinstance(node, SkelSentence):
                out.append(node.sentence)
            elif isinstance(node, SkelNot):
                walk(node.child)
            elif isinstance(node, (SkelAnd, SkelOr)):
                walk(node.left)
                walk(node.right)

        walk(self.skeleton)
        return out


def fold_constants(f: Formula) -> Formula:
    if isinstance(f, Not):
        sub = fold_constants(f.sub)
        if isinstance(sub, TrueFormula):
            return FALSE
        if isinstance(sub, FalseFormula):
            return TRUE
        return Not(sub)
    if isinstance(f, And):
        left, right = fold_constants(f.left), fold_constants(f.right)
        if isinstance(left, FalseFormula) or isinstance(right, FalseFormula):
            return FALSE
        if isinstance(left, TrueFormula):
            return right
        if isinstance(right, TrueFormula):
            return left
        return And(left, right)
    if isinstance(f, Or):
        left, right = fold_constants(f.left), fold_constants(f.right)
        if isinstance(left, TrueFormula) or isinstance(right, TrueFormula):
            return TRUE
        if isinstance(left, FalseFormula):
            return right
        if isinstance(right, FalseFormula):
            return left
        return Or(left, right)
    if isinstance(f, Exists):
        body = fold_constants(f.body)
        if isinstance(body, (TrueFormula, FalseFormula)):
            return body  # domains are non-empty
        return Exists(f.var, body)
    if isinstance(f, Forall):
        body = fold_constants(f.body)
        if isinstance(body, (TrueFormula, FalseFormula)):
            return body
        return Forall(f.var, body)
    if isinstance(f, RelativizedExists):
        body = fold_constants(f.body)
        if isinstance(body, FalseFormula):
            return FALSE
        # exists v in N_r(centers) is never vacuous: the center itself is in the ball
        if isinstance(body, TrueFormula):
            return TRUE
        return RelativizedExists(f.var, f.radius, f.centers, body)
    return f


def _qf_radius(f: Formula) -> int:
    if isinstance(f, DistAtom):
        return f.bound
    if isinstance(f, Not):
        return _qf_radius(f.sub)
    if isinstance(f, (And, Or)):
        return max(_qf_radius(f.left), _qf_radius(f.right))
    return 0


def _all_relativized(f: Formula) -> bool:
    if isinstance(f, (Exists, Forall)):
        return False
    if isinstance(f, Not):
        return _all_relativized(f.sub)
    if isinstance(f, (And, Or)):
        return _all_relativized(f.left) and _all_relativized(f.right)
    if isinstance(f, RelativizedExists):
        return _all_relativized(f.body)
    return True


def _relativized_radius(f: Formula) -> int:
    if isinstance(f, DistAtom):
        return f.bound
    if isinstance(f, Not):
        return _relativized_radius(f.sub)
    if isinstance(f, (And, Or)):
        return max(_relativized_radius(f.left), _relativized_radius(f.right))
    if isinstance(f, RelativizedExists):
        return f.radius + _relativized_radius(f.body)
    return 0


def _literal_conjunction(f: Formula):
    """Flatten an and-tree of (possibly negated) atoms; None if not that shape."""
    if isinstance(f, And):
        left = _literal_conjunction(f.left)
        right = _literal_conjunction(f.right)
        if left is None or right is None:
            return None
        return left + right
    if isinstance(f, RelAtom):
        return [(True, f)]
    if isinstance(f, DistAtom):
        return [(True, f)]
    if isinstance(f, Not):
        if isinstance(f.sub, RelAtom):
            return [(False, f.sub)]
        if isinstance(f.sub, DistAtom):
            flipped = DistAtom(f.sub.x, f.sub.y, ">" if f.sub.op == "<=" else "<=", f.sub.bound)
            return [(True, flipped)]
        return None
    return None


def _split_exists_conjunction(exists_vars: list[str], lits, scope_free: set[str]):
    """Localize one existential conjunction component-wise."""
    variables: list[str] = []
    for _, atom in lits:
        vs = atom.args if isinstance(atom, RelAtom) else (atom.x, atom.y)
        for v in vs:
            if v not in variables:
                variables.append(v)

    adj: dict[str, set[str]] = {v: set() for v in variables}
    for positive, atom in lits:
        connecting = False
        if isinstance(atom, RelAtom) and positive:
            connecting = True
        if isinstance(atom, DistAtom) and atom.op == "<=":
            connecting = True
        if connecting:
            vs = list(dict.fromkeys(atom.args if isinstance(atom, RelAtom) else (atom.x, atom.y)))
            for i in range(len(vs)):
                for j in range(i + 1, len(vs)):
                    adj[vs[i]].add(vs[j])
                    adj[vs[j]].add(vs[i])

    comp_of: dict[str, int] = {}
    comps: list[list[str]] = []
    for v in variables:
        if v in comp_of:
            continue
        idx = len(comps)
        stack, members = [v], []
        comp_of[v] = idx
        while stack:
            u = stack.pop()
            members.append(u)
            for w in adj[u]:
                if w not in comp_of:
                    comp_of[w] = idx
                    stack.append(w)
        comps.append([x for x in variables if comp_of[x] == idx])

    comp_lits: list[list] = [[] for _ in comps]
    for positive, atom in lits:
        vs = list(dict.fromkeys(atom.args if isinstance(atom, RelAtom) else (atom.x, atom.y)))
        indices = {comp_of[v] for v in vs}
        if len(indices) > 1:
            text = format_query(atom if positive else Not(atom))
            raise UnsupportedFragment(
                "literal links independently quantified parts and cannot be localized", text
            )
        comp_lits[indices.pop()].append((positive, atom))

    def literal_formula(positive, atom):
        return atom if positive else Not(atom)

    parts = []
    for members, clits in zip(comps, comp_lits):
        body: Formula | None = None
        for positive, atom in clits:
            lit = literal_formula(positive, atom)
            body = lit if body is None else And(body, lit)
        max_c = max((a.bound for _, a in clits if isinstance(a, DistAtom)), default=0)
        radius = len(members) * max(1, max_c)
        comp_free = [v for v in members if v in scope_free]
        comp_bound = [v for v in exists_vars if v in members]
        if comp_free:
            leaf = body
            for v in reversed(comp_bound):
                leaf = RelativizedExists(v, radius, tuple(comp_free), leaf)
            parts.append(SkelLeaf(leaf, radius))
        else:
            pivot = comp_bound[0]
            theta = body
            for v in reversed(comp_bound[1:]):
                theta = RelativizedExists(v, radius, (pivot,), theta)
            parts.append(SkelSentence(BasicLocalSentence(1, radius, pivot, theta)))

    if not parts:
        return SkelConst(True)
    out = parts[0]
    for p in parts[1:]:
        out = SkelAnd(out, p)
    return out


def localize(db, phi: Formula) -> LocalizedQuery:
    """Rewrite into a boolean skeleton over radius-bounded leaves and sentences."""
    phi = fold_constants(phi)
    fv = free_vars(phi)
    scope_free_all = set(fv)

    def loc(f: Formula, scope_free: set[str]):
        if isinstance(f, TrueFormula):
            return SkelConst(True)
        if isinstance(f, FalseFormula):
            return SkelConst(False)
        if is_quantifier_free(f):
            return SkelLeaf(f, _qf_radius(f))
        if isinstance(f, Not):
            return SkelNot(loc(f.sub, scope_free))
        if isinstance(f, And):
            return SkelAnd(loc(f.left, scope_free), loc(f.right, scope_free))
        if isinstance(f, Or):
            return SkelOr(loc(f.left, scope_free), loc(f.right, scope_free))
        if isinstance(f, Exists):
            exists_vars = []
            body = f
            while isinstance(body, Exists):
                exists_vars.append(body.var)
                body = body.body
            if isinstance(body, Or):
                # existentials distribute over disjunction
                left: Formula = body.left
                right: Formula = body.right
                for v in reversed(exists_vars):
                    left = Exists(v, left)
                    right = Exists(v, right)
                return SkelOr(loc(left, scope_free), loc(right, scope_free))
            lits = _literal_conjunction(body)
            if lits is not None:
                return _split_exists_conjunction(exists_vars, lits, scope_free)
            raise UnsupportedFragment(
                "unrelativized quantification outside the existential-conjunction fragment",
                format_query(f),
            )
        if isinstance(f, RelativizedExists) and _all_relativized(f):
            return SkelLeaf(f, _relativized_radius(f))
        raise UnsupportedFragment("unrelativized quantifier", format_query(f))

    skeleton = loc(phi, scope_free_all)

    def max_radius(node) -> int:
        if isinstance(node, SkelLeaf):
            return node.radius
        if isinstance(node, SkelNot):
            return max_radius(node.child)
        if isinstance(node, (SkelAnd, SkelOr)):
            return max(max_radius(node.left), max_radius(node.right))
        return 0

    return LocalizedQuery(fv, max_radius(skeleton), skeleton)


def eval_and_strip_sentences(db, nbhd, lq: LocalizedQuery) -> Formula:
    """Replace every scattered-sentence leaf by its truth value and fold."""

    def strip(node) -> Formula:
        if isinstance(node, SkelConst):
            return TRUE if node.value else FALSE
        if isinstance(node, SkelLeaf):
            return node.formula
        if isinstance(node, SkelSentence):
            return TRUE if check_basic_local(db, nbhd, node.sentence) else FALSE
        if isinstance(node, SkelNot):
            return Not(strip(node.child))
        if isinstance(node, SkelAnd):
            return And(strip(node.left), strip(node.right))
        if isinstance(node, SkelOr):
            return Or(strip(node.left), strip(node.right))
        raise TypeError(node)

    return fold_constants(strip(lq.skeleton))


def expand_localized(lq: LocalizedQuery) -> Formula:
    """Plain-FO equivalent of the localized query (oracle cross-checks)."""

    def expand(node) -> Formula:
        if isinstance(node, SkelConst):
            return TRUE if node.value else FALSE
        if isinstance(node, SkelLeaf):
            return node.formula
        if isinstance(node, SkelSentence):
            s = node.sentence
            body: Formula = s.theta
            return Exists(s.var, body)
        if isinstance(node, SkelNot):
            return Not(expand(node.child))
        if isinstance(node, SkelAnd):
            return And(expand(node.left), expand(node.right))
        if isinstance(node, SkelOr):
            return Or(expand(node.left), expand(node.right))
        raise TypeError(node)

    return fold_constants(expand(lq.skeleton))
