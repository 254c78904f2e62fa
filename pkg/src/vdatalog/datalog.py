"""Datalog terms, atoms, facts and rules.

Constants are interned strings, so equal constants are the same object and
comparing them is an identity check in the common case.  A :class:`Fact`
is a predicate name plus a tuple of constant strings; an :class:`Atom` may
mix :class:`Var` and :class:`Const` arguments.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Union


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Const:
    value: str

    def __init__(self, value: str):
        object.__setattr__(self, "value", sys.intern(value))

    def __str__(self):
        return quote(self.value)


Term = Union[Var, Const]
Substitution = dict  # variable name -> constant string


class Fact(NamedTuple):
    pred: str
    args: tuple

    @classmethod
    def of(cls, pred: str, *args: str) -> "Fact":
        return cls(pred, tuple(sys.intern(a) for a in args))

    def __str__(self):
        return f"{self.pred}({', '.join(quote(a) for a in self.args)})"


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple

    @classmethod
    def parse_args(cls, pred: str, *args: str) -> "Atom":
        """Shorthand for tests: quoted strings are constants, bare names variables."""
        terms = []
        for a in args:
            if len(a) >= 2 and a[0] == a[-1] == '"':
                terms.append(Const(a[1:-1]))
            else:
                terms.append(Var(a))
        return cls(pred, tuple(terms))

    @property
    def arity(self):
        return len(self.args)

    def variables(self) -> list[str]:
        out = []
        for t in self.args:
            if isinstance(t, Var) and t.name not in out:
                out.append(t.name)
        return out

    def is_ground(self) -> bool:
        return all(isinstance(t, Const) for t in self.args)

    def to_fact(self) -> Fact:
        if not self.is_ground():
            raise ValueError(f"atom {self} is not ground")
        return Fact(self.pred, tuple(t.value for t in self.args))

    def __str__(self):
        return f"{self.pred}({', '.join(str(t) for t in self.args)})"


@dataclass(frozen=True, slots=True)
class Rule:
    head: Atom
    body: tuple

    def __post_init__(self):
        if not self.body:
            raise ValueError("a rule needs at least one body atom")

    def variables(self) -> list[str]:
        out = []
        for atom in (self.head, *self.body):
            for v in atom.variables():
                if v not in out:
                    out.append(v)
        return out

    def unbound_head_variables(self) -> list[str]:
        bound = {v for atom in self.body for v in atom.variables()}
        return [v for v in self.head.variables() if v not in bound]

    def __str__(self):
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."


class LiftedFact(NamedTuple):
    fact: Fact
    pc: Any


def quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def substitute(gamma: Substitution, atom: Atom) -> Atom:
    """Replace every variable bound in ``gamma``; others are left alone."""
    args = tuple(
        Const(gamma[t.name]) if isinstance(t, Var) and t.name in gamma else t
        for t in atom.args
    )
    return Atom(atom.pred, args)


def match_atom(premise: Atom, fact: Fact, gamma: Substitution) -> Optional[Substitution]:
    """Smallest extension of ``gamma`` that maps ``premise`` onto ``fact``, or None."""
    if premise.pred != fact.pred or len(premise.args) != len(fact.args):
        return None
    out = dict(gamma)
    for term, value in zip(premise.args, fact.args):
        if isinstance(term, Const):
            if term.value != value:
                return None
        else:
            bound = out.get(term.name)
            if bound is None:
                out[term.name] = value
            elif bound != value:
                return None
    return out
