"""Presence conditions: propositional formulas over feature names.

Two interchangeable algebras are provided:

* :class:`BDD` -- a hash-consed reduced ordered binary decision diagram.
  Handles are plain ``int`` node ids; two handles are equal exactly when the
  formulas they denote are equivalent, so satisfiability is ``h != FALSE``.
* :class:`TextPCs` -- the "noSAT" representation.  No solving of any kind:
  a PC is kept as a disjunction of literal cubes, normalized only by
  removing duplicate and subsumed cubes.

Both share the concrete formula syntax handled by :func:`parse_formula`::

    pc   ::= conj ( ('||' | '|') conj )*
    conj ::= neg  ( ('&&' | '&') neg )*
    neg  ::= '!' neg | '(' pc ')' | 'True' | 'False' | IDENT

The store is confined to the thread that uses it.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping

FALSE = 0
TRUE = 1

RESERVED = frozenset({"True", "False"})
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class PCError(ValueError):
    """Malformed formula or misuse of a presence condition."""


class PCSyntaxError(PCError):
    def __init__(self, message, text, pos):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class UnassignedFeature(PCError, KeyError):
    def __init__(self, feature):
        super().__init__(f"feature {feature!r} is not assigned by the configuration")
        self.feature = feature

    def __str__(self):
        return self.args[0]


def is_feature_name(name: str) -> bool:
    return bool(_IDENT.fullmatch(name)) and name not in RESERVED


# -- syntax -----------------------------------------------------------------
#
# Formula trees are nested tuples:
#   ('const', bool) | ('var', name) | ('not', f) | ('and', f, g) | ('or', f, g)

_TOKEN = re.compile(r"\s*(?:(&&|&)|(\|\||\|)|(!)|(\()|(\))|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text):
    pos = 0
    tokens = []
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            pos += len(rest) - len(rest.lstrip())
            raise PCSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastindex)
        kind = ("and", "or", "not", "(", ")", "ident")[m.lastindex - 1]
        tokens.append((kind, m.group(m.lastindex), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _FormulaParser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self):
        if self.peek()[0] == "eof":
            raise PCSyntaxError("empty formula", self.text, 0)
        tree = self.disjunction()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise PCSyntaxError(f"unexpected {value!r}", self.text, pos)
        return tree

    def disjunction(self):
        tree = self.conjunction()
        while self.peek()[0] == "or":
            self.take()
            tree = ("or", tree, self.conjunction())
        return tree

    def conjunction(self):
        tree = self.negation()
        while self.peek()[0] == "and":
            self.take()
            tree = ("and", tree, self.negation())
        return tree

    def negation(self):
        kind, value, pos = self.take()
        if kind == "not":
            return ("not", self.negation())
        if kind == "(":
            tree = self.disjunction()
            kind, value, pos = self.take()
            if kind != ")":
                raise PCSyntaxError("expected ')'", self.text, pos)
            return tree
        if kind == "ident":
            if value == "True":
                return ("const", True)
            if value == "False":
                return ("const", False)
            return ("var", value)
        what = "end of input" if kind == "eof" else repr(value)
        raise PCSyntaxError(f"unexpected {what}", self.text, pos)


def parse_formula(text: str):
    """Parse ``text`` into a formula tree; raises :class:`PCSyntaxError`."""
    return _FormulaParser(text).parse()


def formula_features(tree, out=None) -> list[str]:
    """Feature names of ``tree`` in order of first appearance."""
    if out is None:
        out = []
    tag = tree[0]
    if tag == "var":
        if tree[1] not in out:
            out.append(tree[1])
    elif tag == "not":
        formula_features(tree[1], out)
    elif tag in ("and", "or"):
        formula_features(tree[1], out)
        formula_features(tree[2], out)
    return out


def eval_formula(tree, rho: Mapping[str, bool]) -> bool:
    """Direct recursive evaluation of a formula tree (no BDDs involved)."""
    tag = tree[0]
    if tag == "const":
        return tree[1]
    if tag == "var":
        try:
            return bool(rho[tree[1]])
        except KeyError:
            raise UnassignedFeature(tree[1]) from None
    if tag == "not":
        return not eval_formula(tree[1], rho)
    if tag == "and":
        return eval_formula(tree[1], rho) and eval_formula(tree[2], rho)
    return eval_formula(tree[1], rho) or eval_formula(tree[2], rho)


def format_formula(tree) -> str:
    """Render a formula tree with minimal parentheses."""
    def go(t, prec):
        tag = t[0]
        if tag == "const":
            return "True" if t[1] else "False"
        if tag == "var":
            return t[1]
        if tag == "not":
            return "!" + go(t[1], 3)
        p = 2 if tag == "and" else 1
        op = " && " if tag == "and" else " || "
        s = go(t[1], p) + op + go(t[2], p)
        return f"({s})" if p < prec else s
    return go(tree, 0)


# -- BDD --------------------------------------------------------------------

class BDD:
    """Shared ROBDD store.

    Variables are ordered by first registration.  Node 0 is False and node 1
    is True; every other node is a triple ``(var, low, high)`` held in the
    unique table, so structurally identical nodes share one id.
    """

    sat_is_trivial = False

    def __init__(self, features: Iterable[str] = ()):
        self._var = [None, None]
        self._low = [FALSE, TRUE]
        self._high = [FALSE, TRUE]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._cache: dict[tuple, int] = {}
        self._not_cache: dict[int, int] = {}
        self._support_cache: dict[int, frozenset] = {}
        self._text_cache: dict[int, str] = {}
        self._parse_cache: dict[str, int] = {}
        self.features: list[str] = []
        self._level: dict[str, int] = {}
        for name in features:
            self.declare(name)

    @property
    def true(self) -> int:
        return TRUE

    @property
    def false(self) -> int:
        return FALSE

    def __len__(self):
        """Number of nodes, terminals included."""
        return len(self._var)

    def declare(self, name: str) -> int:
        """Register ``name`` as a feature; returns its variable level."""
        level = self._level.get(name)
        if level is not None:
            return level
        if not is_feature_name(name):
            raise PCError(f"invalid feature name {name!r}")
        level = len(self.features)
        self.features.append(name)
        self._level[name] = level
        return level

    def var(self, name: str) -> int:
        return self._mk(self.declare(name), FALSE, TRUE)

    def node(self, u: int) -> tuple[str, int, int]:
        """``(feature, low, high)`` of a decision node."""
        if u <= TRUE:
            raise PCError("terminal nodes have no decision variable")
        return self.features[self._var[u]], self._low[u], self._high[u]

    def _mk(self, v, low, high):
        if low == high:
            return low
        key = (v, low, high)
        u = self._unique.get(key)
        if u is None:
            u = len(self._var)
            self._var.append(v)
            self._low.append(low)
            self._high.append(high)
            self._unique[key] = u
        return u

    # Boolean operations

    def conj(self, a: int, b: int) -> int:
        if a == FALSE or b == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if b == TRUE or a == b:
            return a
        if a > b:
            a, b = b, a
        key = ("and", a, b)
        r = self._cache.get(key)
        if r is None:
            r = self._apply2(self.conj, a, b)
            self._cache[key] = r
        return r

    def disj(self, a: int, b: int) -> int:
        if a == TRUE or b == TRUE:
            return TRUE
        if a == FALSE:
            return b
        if b == FALSE or a == b:
            return a
        if a > b:
            a, b = b, a
        key = ("or", a, b)
        r = self._cache.get(key)
        if r is None:
            r = self._apply2(self.disj, a, b)
            self._cache[key] = r
        return r

    def _apply2(self, op, a, b):
        va, vb = self._var[a], self._var[b]
        if va == vb:
            return self._mk(va, op(self._low[a], self._low[b]), op(self._high[a], self._high[b]))
        if va < vb:
            return self._mk(va, op(self._low[a], b), op(self._high[a], b))
        return self._mk(vb, op(a, self._low[b]), op(a, self._high[b]))

    def neg(self, a: int) -> int:
        if a <= TRUE:
            return 1 - a
        r = self._not_cache.get(a)
        if r is None:
            r = self._mk(self._var[a], self.neg(self._low[a]), self.neg(self._high[a]))
            self._not_cache[a] = r
            self._not_cache[r] = a
        return r

    def conj_all(self, items: Iterable[int]) -> int:
        r = TRUE
        for x in items:
            r = self.conj(r, x)
            if r == FALSE:
                break
        return r

    def is_sat(self, a: int) -> bool:
        return a != FALSE

    def is_valid(self, a: int) -> bool:
        return a == TRUE

    def implies(self, a: int, b: int) -> bool:
        return self.conj(a, self.neg(b)) == FALSE

    # Formulas

    def from_formula(self, tree) -> int:
        tag = tree[0]
        if tag == "const":
            return TRUE if tree[1] else FALSE
        if tag == "var":
            return self.var(tree[1])
        if tag == "not":
            return self.neg(self.from_formula(tree[1]))
        if tag == "and":
            return self.conj(self.from_formula(tree[1]), self.from_formula(tree[2]))
        return self.disj(self.from_formula(tree[1]), self.from_formula(tree[2]))

    def parse(self, text: str) -> int:
        """Canonical node for formula ``text``; registers new features."""
        u = self._parse_cache.get(text)
        if u is None:
            tree = parse_formula(text)
            # Register in textual order before building so that ordering
            # follows first appearance rather than evaluation order.
            for name in formula_features(tree):
                self.declare(name)
            u = self.from_formula(tree)
            self._parse_cache[text] = u
        return u

    def cubes(self, a: int) -> list[list[tuple[str, bool]]]:
        """Paths from ``a`` to True as ``(feature, polarity)`` lists, in variable order."""
        out = []
        path = []

        def walk(u):
            if u == FALSE:
                return
            if u == TRUE:
                out.append(list(path))
                return
            name = self.features[self._var[u]]
            path.append((name, False))
            walk(self._low[u])
            path[-1] = (name, True)
            walk(self._high[u])
            path.pop()

        walk(a)
        return out

    def to_text(self, a: int) -> str:
        """Deterministic disjunction-of-paths rendering; ``parse`` maps it back to ``a``."""
        s = self._text_cache.get(a)
        if s is None:
            if a == TRUE:
                s = "True"
            elif a == FALSE:
                s = "False"
            else:
                terms = sorted(
                    " && ".join(n if pos else "!" + n for n, pos in cube)
                    for cube in self.cubes(a)
                )
                s = " || ".join(terms)
            self._text_cache[a] = s
        return s

    def support(self, a: int) -> frozenset:
        """Features the function ``a`` depends on."""
        s = self._support_cache.get(a)
        if s is None:
            if a <= TRUE:
                s = frozenset()
            else:
                s = (frozenset([self.features[self._var[a]]])
                     | self.support(self._low[a]) | self.support(self._high[a]))
            self._support_cache[a] = s
        return s

    def evaluate(self, a: int, rho: Mapping[str, bool]) -> bool:
        """Truth value of ``a`` under the total assignment ``rho``."""
        for name in self.support(a):
            if name not in rho:
                raise UnassignedFeature(name)
        u = a
        while u > TRUE:
            u = self._high[u] if rho[self.features[self._var[u]]] else self._low[u]
        return u == TRUE

    def cube(self, rho: Mapping[str, bool]) -> int:
        """Conjunction of the literals of ``rho``."""
        r = TRUE
        for name, value in rho.items():
            lit = self.var(name)
            r = self.conj(r, lit if value else self.neg(lit))
        return r

    def node_count(self, a: int) -> int:
        seen = set()
        stack = [a]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            if u > TRUE:
                stack.append(self._low[u])
                stack.append(self._high[u])
        return len(seen)

    def check(self, a: int) -> None:
        """Structural audit of every node reachable from ``a``.

        Raises :class:`AssertionError` when a node is not reduced, violates
        the variable order, or is missing from the unique table.
        """
        stack = [a]
        seen = set()
        while stack:
            u = stack.pop()
            if u in seen or u <= TRUE:
                continue
            seen.add(u)
            v, lo, hi = self._var[u], self._low[u], self._high[u]
            assert lo != hi, f"node {u} is redundant"
            for child in (lo, hi):
                assert child <= TRUE or self._var[child] > v, f"node {u} is out of order"
            assert self._unique.get((v, lo, hi)) == u, f"node {u} is not hash-consed"
            stack.append(lo)
            stack.append(hi)


# -- textual (noSAT) presence conditions ------------------------------------

class TextPCs:
    """PC algebra without any satisfiability reasoning.

    A PC is a frozenset of cubes; a cube is a frozenset of literal strings
    (``"FA"`` or ``"!FA"``).  Conjunction concatenates cubes pairwise,
    disjunction takes the union.  The only normalization is syntactic: a
    cube that contains another cube of the same PC is dropped.
    Contradictory cubes such as ``{"FA", "!FA"}`` are kept, so equivalent
    PCs may have different representations and an unsatisfiable PC is not
    recognized as such.
    """

    sat_is_trivial = True

    def __init__(self, features: Iterable[str] = ()):
        self.features: list[str] = []
        self._known: set[str] = set()
        self._parse_cache: dict[str, frozenset] = {}
        self._conj_cache: dict[tuple, frozenset] = {}
        self._text_cache: dict[frozenset, str] = {}
        for name in features:
            self.declare(name)

    true = frozenset([frozenset()])
    false = frozenset()

    def declare(self, name: str) -> int:
        if name not in self._known:
            if not is_feature_name(name):
                raise PCError(f"invalid feature name {name!r}")
            self._known.add(name)
            self.features.append(name)
        return self.features.index(name)

    def var(self, name):
        self.declare(name)
        return frozenset([frozenset([name])])

    def conj(self, a, b):
        if a == self.true:
            return b
        if b == self.true:
            return a
        key = (a, b)
        r = self._conj_cache.get(key)
        if r is None:
            r = _absorb({x | y for x in a for y in b})
            self._conj_cache[key] = r
        return r

    def disj(self, a, b):
        if a == b or b <= a:
            return a
        return _absorb(a | b)

    def neg(self, a):
        # Negation appears only while reading formulas; push it to literals.
        r = self.true
        for cube in a:
            r = self.conj(r, frozenset(frozenset([_flip(lit)]) for lit in cube))
        return r

    def conj_all(self, items):
        r = self.true
        for x in items:
            r = self.conj(r, x)
        return r

    def is_sat(self, a) -> bool:
        return True

    def from_formula(self, tree):
        tag = tree[0]
        if tag == "const":
            return self.true if tree[1] else self.false
        if tag == "var":
            return self.var(tree[1])
        if tag == "not":
            return self.neg(self.from_formula(tree[1]))
        if tag == "and":
            return self.conj(self.from_formula(tree[1]), self.from_formula(tree[2]))
        return self.disj(self.from_formula(tree[1]), self.from_formula(tree[2]))

    def parse(self, text: str):
        r = self._parse_cache.get(text)
        if r is None:
            tree = parse_formula(text)
            for name in formula_features(tree):
                self.declare(name)
            r = self.from_formula(tree)
            self._parse_cache[text] = r
        return r

    def to_text(self, a) -> str:
        s = self._text_cache.get(a)
        if s is None:
            if not a:
                s = "False"
            elif frozenset() in a and len(a) == 1:
                s = "True"
            else:
                terms = sorted(
                    " && ".join(sorted(c, key=lambda lit: (lit.lstrip("!"), lit))) or "True"
                    for c in a
                )
                s = " || ".join(terms)
            self._text_cache[a] = s
        return s

    def evaluate(self, a, rho: Mapping[str, bool]) -> bool:
        for cube in a:
            for lit in cube:
                if lit.lstrip("!") not in rho:
                    raise UnassignedFeature(lit.lstrip("!"))
        return any(all(_lit_value(lit, rho) for lit in cube) for cube in a)


def _absorb(cubes):
    kept = []
    for cube in sorted(cubes, key=len):
        if not any(k <= cube for k in kept):
            kept.append(cube)
    return frozenset(kept)


def _flip(lit):
    return lit[1:] if lit.startswith("!") else "!" + lit


def _lit_value(lit, rho):
    if lit.startswith("!"):
        return not rho[lit[1:]]
    return bool(rho[lit])
