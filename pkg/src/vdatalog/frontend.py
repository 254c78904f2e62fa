"""Reading and writing programs, fact files and feature models.

The program dialect is a small subset of Souffle::

    .decl Assign(to: symbol, from: symbol)
    .input Assign
    .output VarPointsTo
    VarPointsTo(v1, h2) :- Assign(v1, v2), VarPointsTo(v2, h2).
    New("o1", "A") @ FA && !FB.

Fact files are tab-separated, one fact per line, with an optional last
column ``@ <formula>`` holding the fact's presence condition.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .datalog import Atom, Const, Fact, LiftedFact, Rule, Var
from .pc import BDD, PCError, PCSyntaxError, parse_formula


class LoadError(Exception):
    """A program, fact file or feature model could not be loaded."""


class FileAccessError(LoadError):
    """An input file or directory could not be read."""


class ProgramError(LoadError):
    def __init__(self, message, line=None, col=None, source=None):
        where = ""
        if line is not None:
            where = f"{source or '<program>'}:{line}:{col}: "
        super().__init__(where + message)
        self.line = line
        self.col = col


@dataclass
class Program:
    declarations: dict = field(default_factory=dict)  # name -> arity
    rules: list = field(default_factory=list)
    inline_facts: list = field(default_factory=list)  # LiftedFact
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def derived_predicates(self) -> list[str]:
        heads = {r.head.pred for r in self.rules}
        return [p for p in self.declarations if p in heads]

    def input_predicates(self) -> list[str]:
        return list(self.inputs) if self.inputs else list(self.declarations)

    def output_predicates(self) -> list[str]:
        if self.outputs:
            return list(self.outputs)
        return [p for p in self.derived_predicates() if p not in self.inputs]


# -- program text -----------------------------------------------------------

_TOKENS = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<directive>\.(?:decl|input|output|type|comp|init|functor|pragma|plan|printsize|limitsize|override)\b)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?[0-9]+(?:\.[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<implies>:-)
  | (?P<op><=|>=|!=|=|<|>|\+|\*|/|-)
  | (?P<punct>[(),:;.@!{}\[\]|&])
""", re.VERBOSE | re.DOTALL)


class _Token:
    __slots__ = ("kind", "text", "pos", "line", "col")

    def __init__(self, kind, text, pos, line, col):
        self.kind = kind
        self.text = text
        self.pos = pos
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


def _lex(text, source):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKENS.match(text, pos)
        if m is None:
            raise ProgramError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        if kind == "comment" and text.startswith("/*", pos) and not m.group().endswith("*/"):
            raise ProgramError("unterminated comment", line, pos - line_start + 1, source)
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), pos, line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


def _unquote(s):
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _ProgramParser:
    def __init__(self, text, pcs, source):
        self.text = text
        self.pcs = pcs
        self.source = source
        self.toks = _lex(text, source)
        self.i = 0
        self.prog = Program()
        self.uses = []  # (atom, token) for declaration checks

    def error(self, msg, tok=None):
        tok = tok or self.toks[self.i]
        return ProgramError(msg, tok.line, tok.col, self.source)

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind, text=None):
        tok = self.take()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}", tok)
        return tok

    def at(self, kind, text=None):
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def parse(self):
        while not self.at("eof"):
            if self.at("directive"):
                self.directive()
            else:
                self.clause()
        self.check()
        return self.prog

    def directive(self):
        tok = self.take()
        name = tok.text
        if name == ".decl":
            self.declaration(tok)
        elif name in (".input", ".output"):
            names = [self.expect("ident").text]
            while self.at("punct", ","):
                self.take()
                names.append(self.expect("ident").text)
            if self.at("punct", "("):
                raise self.error(f"{name} parameters are not supported")
            target = self.prog.inputs if name == ".input" else self.prog.outputs
            for n in names:
                if n not in target:
                    target.append(n)
        else:
            raise self.error(f"unsupported directive {name}", tok)

    def declaration(self, start):
        name_tok = self.expect("ident")
        name = name_tok.text
        self.expect("punct", "(")
        arity = 0
        if not self.at("punct", ")"):
            while True:
                self.expect("ident")
                self.expect("punct", ":")
                typ = self.expect("ident")
                if typ.text != "symbol":
                    raise self.error(f"column type {typ.text!r} is not supported; use symbol", typ)
                arity += 1
                if not self.at("punct", ","):
                    break
                self.take()
        self.expect("punct", ")")
        if arity == 0:
            raise self.error(f"predicate {name} must have at least one column", name_tok)
        if name in self.prog.declarations:
            raise self.error(f"predicate {name} declared twice", name_tok)
        self.prog.declarations[name] = arity

    def atom(self):
        if self.at("punct", "!"):
            raise self.error("negation is not supported")
        name_tok = self.peek()
        if name_tok.kind != "ident" or self.peek(1).text != "(":
            if name_tok.kind in ("ident", "number", "string") and self.peek(1).kind == "op":
                raise self.error("arithmetic and constraints are not supported")
            if name_tok.kind == "ident" and self.peek(1).text == ":":
                raise self.error("aggregates are not supported")
            raise self.error(f"expected an atom, found {name_tok.text or 'end of input'!r}")
        self.take()
        self.expect("punct", "(")
        args = []
        if not self.at("punct", ")"):
            while True:
                tok = self.take()
                if tok.kind == "string":
                    args.append(Const(_unquote(tok.text)))
                elif tok.kind == "ident":
                    if tok.text == "_":
                        raise self.error("anonymous variables are not supported", tok)
                    args.append(Var(tok.text))
                elif tok.kind == "number":
                    raise self.error("numbers are not supported; quote the constant", tok)
                else:
                    raise self.error(f"expected a term, found {tok.text!r}", tok)
                if self.at("op") or self.at("punct", "("):
                    raise self.error("functors and arithmetic are not supported")
                if not self.at("punct", ","):
                    break
                self.take()
        self.expect("punct", ")")
        atom = Atom(name_tok.text, tuple(args))
        self.uses.append((atom, name_tok))
        return atom

    def clause(self):
        start = self.peek()
        head = self.atom()
        if self.at("implies"):
            self.take()
            body = [self.atom()]
            while self.at("punct", ","):
                self.take()
                body.append(self.atom())
            if self.at("punct", ";"):
                raise self.error("disjunctive bodies are not supported")
            self.expect("punct", ".")
            rule = Rule(head, tuple(body))
            unbound = rule.unbound_head_variables()
            if unbound:
                raise self.error(
                    f"variable {unbound[0]!r} in the head of {head.pred} does not occur in the body", start)
            self.prog.rules.append(rule)
            return
        pc = self.pcs.true
        if self.at("punct", "@"):
            pc = self.annotation()
        else:
            self.expect("punct", ".")
        if not head.is_ground():
            var = head.variables()[0]
            raise self.error(f"fact {head.pred} contains variable {var!r}", start)
        self.prog.inline_facts.append(LiftedFact(head.to_fact(), pc))

    def annotation(self):
        at = self.take()
        begin = self.peek()
        # The formula runs up to the clause-terminating '.'
        while not (self.at("punct", ".") or self.at("eof")):
            self.take()
        end = self.expect("punct", ".")
        formula = self.text[at.pos + 1:end.pos]
        try:
            return self.pcs.parse(formula)
        except PCSyntaxError as exc:
            raise ProgramError(f"bad presence condition: {exc}", begin.line, begin.col, self.source) from None
        except PCError as exc:
            raise ProgramError(f"bad presence condition: {exc}", begin.line, begin.col, self.source) from None

    def check(self):
        decls = self.prog.declarations
        for atom, tok in self.uses:
            arity = decls.get(atom.pred)
            if arity is None:
                raise self.error(f"undeclared predicate {atom.pred}", tok)
            if arity != atom.arity:
                raise self.error(f"{atom.pred} has arity {arity} but is used with {atom.arity} arguments", tok)
        for name in self.prog.inputs + self.prog.outputs:
            if name not in decls:
                raise ProgramError(f"directive names undeclared predicate {name}", source=self.source)


def parse_program(text: str, pcs=None, source: str | None = None) -> Program:
    """Parse program text; annotated inline facts get PCs from ``pcs`` (a new BDD if omitted)."""
    if pcs is None:
        pcs = BDD()
    return _ProgramParser(text, pcs, source).parse()


def format_program(program: Program, pcs) -> str:
    """Render ``program`` back into the dialect accepted by :func:`parse_program`."""
    lines = []
    for name, arity in program.declarations.items():
        cols = ", ".join(f"c{i}: symbol" for i in range(arity))
        lines.append(f".decl {name}({cols})")
    for name in program.inputs:
        lines.append(f".input {name}")
    for name in program.outputs:
        lines.append(f".output {name}")
    for rule in program.rules:
        lines.append(str(rule))
    for fact, pc in program.inline_facts:
        if pc == pcs.true:
            lines.append(f"{fact}.")
        else:
            lines.append(f"{fact} @ {pcs.to_text(pc)}.")
    return "\n".join(lines) + "\n"


# -- fact files -------------------------------------------------------------

def load_fact_file(path, predicate: str, arity: int, pcs) -> list[LiftedFact]:
    """Read one TSV fact file; repeated facts have their PCs disjoined."""
    merged = {}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) == arity + 1 and cols[-1].lstrip().startswith("@"):
            text = cols[-1].lstrip()[1:]
            try:
                pc = pcs.parse(text)
            except PCError as exc:
                raise LoadError(f"{path}:{lineno}: bad presence condition: {exc}") from None
            cols = cols[:-1]
        elif len(cols) == arity:
            pc = pcs.true
        else:
            raise LoadError(
                f"{path}:{lineno}: {predicate} expects {arity} columns "
                f"(plus an optional '@' column), found {len(cols)}")
        fact = Fact.of(predicate, *cols)
        if fact in merged:
            merged[fact] = pcs.disj(merged[fact], pc)
        else:
            merged[fact] = pc
    return [LiftedFact(f, pc) for f, pc in merged.items()]


def fact_lines(facts, pcs) -> list[str]:
    """TSV lines for ``facts`` sorted by column tuple."""
    out = []
    for fact, pc in sorted(facts, key=lambda lf: lf[0].args):
        for value in fact.args:
            if "\t" in value or "\n" in value or "\r" in value:
                raise ValueError(f"constant {value!r} cannot be written to a TSV file")
        line = "\t".join(fact.args)
        if pcs is not None and pc != pcs.true:
            line += "\t@ " + pcs.to_text(pc)
        out.append(line + "\n")
    return out


def write_fact_file(facts, path, pcs) -> int:
    """Write ``facts`` (all of one predicate) to ``path``; returns bytes written."""
    data = "".join(fact_lines(facts, pcs)).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load_facts_dir(program: Program, directory, pcs) -> list[LiftedFact]:
    """Load ``<Pred>.facts`` for every input predicate found in ``directory``."""
    facts = []
    if directory is None:
        return facts
    directory = Path(directory)
    if not directory.is_dir():
        raise FileAccessError(f"facts directory {directory} does not exist")
    for pred in program.input_predicates():
        path = directory / f"{pred}.facts"
        if path.exists():
            facts.extend(load_fact_file(path, pred, program.declarations[pred], pcs))
    return facts


# -- feature models ---------------------------------------------------------

def read_feature_model(arg: str | None) -> str:
    """Formula text from ``--fm``: either a formula or a path to a one-line file."""
    if arg is None:
        return "True"
    if os.path.isfile(arg):
        try:
            with open(arg, encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
        except OSError as exc:
            raise LoadError(f"cannot read feature model {arg}: {exc}") from exc
        if len(lines) != 1:
            raise LoadError(f"feature model file {arg} must hold exactly one formula")
        text = lines[0]
    else:
        text = arg
    try:
        tree = parse_formula(text)
    except PCError as exc:
        raise LoadError(f"bad feature model: {exc}") from None
    if BDD().from_formula(tree) == 0:
        raise LoadError(f"feature model {text!r} is unsatisfiable")
    return text


def read_program(path, pcs) -> Program:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc
    return parse_program(text, pcs, source=str(path))
