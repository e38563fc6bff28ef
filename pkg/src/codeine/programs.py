"""Constraint programs: the `.fd` source language and built-in models.

A program is a list of variable declarations, constraint declarations and
at most one labeling directive.  Statements are ';'-terminated, comments
start with '#'.  Constraint terms:

    eq(X,Y)  eqc(X,k)  neq(X,Y)  neq_offset(X,Y,k)   # X != Y + k
    lt(X,Y)  leq(X,Y)  element(I,[k1,...,kn],V)      # 1-based index
    alldifferent([X1,...])  or(term,term)            # two-branch choice

`alldifferent` is rewritten into pairwise `neq` constraints at load time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_MAX_VALUE = 268435455


class ProgramError(ValueError):
    """Syntax or semantic error in a program, with line/column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: Optional[int] = None     # None means the configurable default domain
    hi: Optional[int] = None


@dataclass(frozen=True)
class Eq:
    x: str
    y: str


@dataclass(frozen=True)
class EqConst:
    x: str
    k: int


@dataclass(frozen=True)
class Neq:
    x: str
    y: str


@dataclass(frozen=True)
class NeqOffset:
    x: str
    y: str
    k: int                       # x != y + k


@dataclass(frozen=True)
class Lt:
    x: str
    y: str


@dataclass(frozen=True)
class Leq:
    x: str
    y: str


@dataclass(frozen=True)
class Element:
    index: str
    table: tuple
    value: str


@dataclass(frozen=True)
class Disj:
    left: object
    right: object


@dataclass(frozen=True)
class ConstraintDecl:
    term: object
    name: Optional[str] = None


@dataclass(frozen=True)
class Labeling:
    variables: tuple
    var_strategy: str = "leftmost"       # leftmost | firstfail
    val_strategy: str = "ascending"      # ascending | descending


@dataclass
class Program:
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    labeling: Optional[Labeling] = None

    def var_names(self) -> list[str]:
        return [v.name for v in self.variables]


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<dots>\.\.)
  | (?P<num>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[;:,()\[\]])
    """,
    re.VERBOSE,
)

_VAR_STRATEGIES = ("leftmost", "firstfail")
_VAL_STRATEGIES = ("ascending", "descending")


@dataclass(frozen=True)
class _Tok:
    text: str
    kind: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ProgramError(f"unexpected character {text[i]!r}", line, col)
        chunk = m.group()
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(chunk, kind, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    toks.append(_Tok("", "eof", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ProgramError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def expect_ident(self, what: str = "identifier") -> _Tok:
        tok = self.next()
        if tok.kind != "ident":
            self.error(f"expected {what}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def expect_int(self) -> int:
        tok = self.next()
        if tok.kind != "num":
            self.error(f"expected integer, found {tok.text or 'end of input'!r}", tok)
        return int(tok.text)

    def program(self) -> Program:
        prog = Program()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "var":
                self.var_decl(prog)
            elif tok.text == "constraint":
                self.constraint_decl(prog)
            elif tok.text == "label":
                self.label_decl(prog)
            else:
                self.error(f"expected statement, found {tok.text!r}", tok)
        return prog

    def var_decl(self, prog: Program):
        self.expect("var")
        name_tok = self.expect_ident("variable name")
        lo = hi = None
        if self.peek().text == "in":
            self.next()
            lo = self.expect_int()
            self.expect("..")
            hi = self.expect_int()
            if lo > hi:
                self.error(f"reversed domain {lo}..{hi}", name_tok)
        self.expect(";")
        if any(v.name == name_tok.text for v in prog.variables):
            self.error(f"duplicate variable {name_tok.text!r}", name_tok)
        prog.variables.append(VarDecl(name_tok.text, lo, hi))

    def constraint_decl(self, prog: Program):
        self.expect("constraint")
        name = None
        # optional "name:" before the term
        if (
            self.peek().kind == "ident"
            and self.toks[self.i + 1].text == ":"
        ):
            name = self.next().text
            self.next()
            if any(c.name == name for c in prog.constraints):
                self.error(f"duplicate constraint name {name!r}")
        term = self.term()
        self.expect(";")
        prog.constraints.append(ConstraintDecl(term, name))

    def term(self):
        tok = self.expect_ident("constraint term")
        kind = tok.text
        self.expect("(")
        if kind == "eq":
            t = Eq(self.var_ref(), self.second_arg_var())
        elif kind == "eqc":
            t = EqConst(self.var_ref(), self.second_arg_int())
        elif kind == "neq":
            t = Neq(self.var_ref(), self.second_arg_var())
        elif kind == "neq_offset":
            x = self.var_ref()
            self.expect(",")
            y = self.var_ref()
            self.expect(",")
            t = NeqOffset(x, y, self.expect_int())
        elif kind == "lt":
            t = Lt(self.var_ref(), self.second_arg_var())
        elif kind == "leq":
            t = Leq(self.var_ref(), self.second_arg_var())
        elif kind == "element":
            index = self.var_ref()
            self.expect(",")
            table = self.int_list()
            if not table:
                self.error("element table must be non-empty", tok)
            self.expect(",")
            t = Element(index, table, self.var_ref())
        elif kind == "alldifferent":
            t = ("alldifferent", self.var_list())
        elif kind == "or":
            left = self.term()
            self.expect(",")
            t = Disj(left, self.term())
        else:
            self.error(f"unknown constraint {kind!r}", tok)
        self.expect(")")
        return t

    def second_arg_var(self) -> str:
        self.expect(",")
        return self.var_ref()

    def second_arg_int(self) -> int:
        self.expect(",")
        return self.expect_int()

    def var_ref(self) -> str:
        return self.expect_ident("variable").text

    def int_list(self) -> tuple:
        self.expect("[")
        items = [self.expect_int()]
        while self.peek().text == ",":
            self.next()
            items.append(self.expect_int())
        self.expect("]")
        return tuple(items)

    def var_list(self) -> tuple:
        self.expect("[")
        items = [self.var_ref()]
        while self.peek().text == ",":
            self.next()
            items.append(self.var_ref())
        self.expect("]")
        return tuple(items)

    def label_decl(self, prog: Program):
        tok = self.expect("label")
        if prog.labeling is not None:
            self.error("duplicate label directive", tok)
        self.expect("(")
        variables = self.var_list()
        self.expect(")")
        var_strategy, val_strategy = "leftmost", "ascending"
        if self.peek().text == "with":
            self.next()
            vs = self.expect_ident("variable strategy").text
            if vs not in _VAR_STRATEGIES:
                self.error(f"unknown variable strategy {vs!r}")
            self.expect(",")
            vl = self.expect_ident("value strategy").text
            if vl not in _VAL_STRATEGIES:
                self.error(f"unknown value strategy {vl!r}")
            var_strategy, val_strategy = vs, vl
        self.expect(";")
        prog.labeling = Labeling(variables, var_strategy, val_strategy)


def _expand_alldifferent(term, out: list):
    """Rewrite alldifferent into pairwise neq; recurse into disjunctions."""
    if isinstance(term, tuple) and term and term[0] == "alldifferent":
        names = term[1]
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                out.append(Neq(names[i], names[j]))
        return
    if isinstance(term, Disj):
        left: list = []
        right: list = []
        _expand_alldifferent(term.left, left)
        _expand_alldifferent(term.right, right)
        if len(left) != 1 or len(right) != 1:
            raise ValueError("alldifferent cannot appear inside or(...)")
        out.append(Disj(left[0], right[0]))
        return
    out.append(term)


def _term_vars(term) -> list[str]:
    if isinstance(term, (Eq, Neq, NeqOffset, Lt, Leq)):
        return [term.x, term.y]
    if isinstance(term, EqConst):
        return [term.x]
    if isinstance(term, Element):
        return [term.index, term.value]
    if isinstance(term, Disj):
        return _term_vars(term.left) + _term_vars(term.right)
    raise AssertionError(f"unknown term {term!r}")


def load_program(text: str) -> Program:
    """Parse and validate an `.fd` program."""
    prog = _Parser(text).program()
    declared = set(prog.var_names())
    expanded: list[ConstraintDecl] = []
    for decl in prog.constraints:
        terms: list = []
        _expand_alldifferent(decl.term, terms)
        for idx, term in enumerate(terms):
            name = decl.name if len(terms) == 1 else None
            for var in _term_vars(term):
                if var not in declared:
                    raise ProgramError(f"undeclared variable {var!r}", 0, 0)
            expanded.append(ConstraintDecl(term, name))
    prog.constraints = expanded
    if prog.labeling:
        for var in prog.labeling.variables:
            if var not in declared:
                raise ProgramError(f"labeling references undeclared variable {var!r}", 0, 0)
    return prog


# -- built-in models ----------------------------------------------------

TOY_PROGRAM = """\
# index lookup in a small table plus a two-branch choice
var I;
var A;
constraint element(I, [2,5,7], A);
constraint or(eq(A,I), eqc(A,2));
label([I,A]);
"""


def queens_text(n: int) -> str:
    """n-queens: one variable per column, value = row (1..n)."""
    lines = [f"# {n}-queens"]
    names = [f"Q{i}" for i in range(1, n + 1)]
    for name in names:
        lines.append(f"var {name} in 1..{n};")
    lines.append("constraint alldifferent([" + ",".join(names) + "]);")
    for i in range(n):
        for j in range(i + 1, n):
            d = j - i
            lines.append(f"constraint neq_offset({names[i]},{names[j]},{d});")
            lines.append(f"constraint neq_offset({names[i]},{names[j]},{-d});")
    lines.append("label([" + ",".join(names) + "]);")
    return "\n".join(lines) + "\n"


def propag_text(n: int) -> str:
    """Infeasible bounds ping-pong: 1 <= x,y <= n, x < y, y < x."""
    return (
        f"var X in 1..{n};\n"
        f"var Y in 1..{n};\n"
        "constraint lt(X,Y);\n"
        "constraint lt(Y,X);\n"
        "label([X,Y]);\n"
    )


def builtin_source(spec: str) -> str | None:
    """Resolve 'builtin:' program specs: toy, queens:N, propag:N."""
    if not spec.startswith("builtin:"):
        return None
    parts = spec.split(":")
    kind = parts[1] if len(parts) > 1 else ""
    if kind == "toy":
        return TOY_PROGRAM
    if kind == "queens":
        return queens_text(int(parts[2]) if len(parts) > 2 else 8)
    if kind == "propag":
        return propag_text(int(parts[2]) if len(parts) > 2 else 1000)
    raise ValueError(f"unknown builtin program {spec!r}")
