"""Event-pattern language: parsing, static checks, evaluation, formatting.

A pattern is ``label: when <formula> do|do_synchro <action>, ...`` where
the formula is a first-order combination of elementary conditions on
event attributes and the actions either collect attribute values
(``current``) or name an analyzer procedure (``call``).  Parsing resolves
attribute aliases and type-checks every condition; evaluation is pure and
treats a condition on an attribute absent from the event as false.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .events import (
    ABSENT,
    ATTR_ALIASES,
    CONDITION_ATTRS,
    INT_ATTRS,
    PORT_SET,
    REQUEST_ATTRS,
    order_attributes,
)

STRING_ATTRS = frozenset({"vident", "vname", "cident", "cname", "stage"})
NAMED_ATTRS = frozenset({"vname", "cname"})
DOMAIN_COND_ATTRS = frozenset({"vdom", "delta"})

ORDER_OPS = frozenset({"<", ">", ">=", "=<"})
EQ_OPS = frozenset({"=", "\\="})
SET_OPS = frozenset({"in", "notin"})
CONTAIN_OPS = frozenset({"contains", "notcontains"})

_LABEL_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*\Z")
_VARNAME_RE = re.compile(r"[A-Z_][a-zA-Z0-9_]*\Z")
_BARE_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*\Z")

_KEYWORDS = frozenset({
    "when", "do", "do_synchro", "dosynchro", "or", "and", "not", "true",
    "in", "notin", "contains", "notcontains", "isNamed", "current", "call",
})


class PatternError(ValueError):
    """Base for pattern parse and type errors."""

    def __init__(self, msg: str, pos: int | None = None):
        at = f" at position {pos}" if pos is not None else ""
        super().__init__(msg + at)
        self.pos = pos


class PatternSyntaxError(PatternError):
    pass


class PatternTypeError(PatternError):
    pass


# -- AST ----------------------------------------------------------------

@dataclass(frozen=True)
class TrueCond:
    pass


@dataclass(frozen=True)
class Cmp:
    attr: str
    op: str
    value: object               # int | str | tuple of those


@dataclass(frozen=True)
class IsNamed:
    attr: str


@dataclass(frozen=True)
class Not:
    inner: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Current:
    items: tuple                 # of (attr, varname-or-None)


@dataclass(frozen=True)
class Call:
    proc: str
    args: tuple


@dataclass(frozen=True)
class Pattern:
    label: str
    formula: object
    sync: bool
    actions: tuple

    def current_attrs(self) -> list[str]:
        """Attributes requested by the pattern's current actions, in order."""
        attrs = []
        for action in self.actions:
            if isinstance(action, Current):
                attrs.extend(attr for attr, _ in action.items)
        return order_attributes(attrs)

    def bindings(self) -> dict:
        """Map of binding variable name -> attribute name."""
        out = {}
        for action in self.actions:
            if isinstance(action, Current):
                for attr, var in action.items:
                    if var is not None:
                        out[var] = attr
        return out


# -- tokenizer ----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>-?\d+)
  | (?P<str>'(?:[^'\\]|\\.)*')
  | (?P<op>\\=|>=|=<|[<>=])
  | (?P<punct>[():,\[\]])
  | (?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise PatternSyntaxError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), i))
        i = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise PatternSyntaxError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return tok

    def expect_ident(self, what: str) -> _Tok:
        tok = self.next()
        if tok.kind != "ident":
            raise PatternSyntaxError(f"expected {what}, found {tok.text or 'end of input'!r}", tok.pos)
        return tok

    # pattern := label ":" "when" formula sync actions
    def pattern(self) -> Pattern:
        label_tok = self.expect_ident("pattern label")
        label = label_tok.text
        if not _LABEL_RE.match(label) or label in _KEYWORDS:
            raise PatternSyntaxError(f"bad pattern label {label!r}", label_tok.pos)
        self.expect(":")
        self.expect("when")
        formula = self.formula()
        sync_tok = self.next()
        if sync_tok.text == "do":
            sync = False
        elif sync_tok.text in ("do_synchro", "dosynchro"):
            sync = True
        else:
            raise PatternSyntaxError(
                f"expected 'do' or 'do_synchro', found {sync_tok.text!r}", sync_tok.pos
            )
        actions = [self.action()]
        while self.peek().text == ",":
            self.next()
            actions.append(self.action())
        tok = self.peek()
        if tok.kind != "eof":
            raise PatternSyntaxError(f"trailing input {tok.text!r}", tok.pos)
        return Pattern(label=label, formula=formula, sync=sync, actions=tuple(actions))

    # formula := and_f ("or" and_f)*
    def formula(self):
        node = self.and_formula()
        while self.peek().text == "or":
            self.next()
            node = Or(node, self.and_formula())
        return node

    def and_formula(self):
        node = self.not_formula()
        while self.peek().text == "and":
            self.next()
            node = And(node, self.not_formula())
        return node

    def not_formula(self):
        if self.peek().text == "not":
            self.next()
            return Not(self.not_formula())
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok.text == "(":
            self.next()
            node = self.formula()
            self.expect(")")
            return node
        return self.condition()

    def condition(self):
        tok = self.next()
        if tok.text == "true":
            return TrueCond()
        if tok.text == "isNamed":
            self.expect("(")
            attr_tok = self.expect_ident("attribute")
            attr = _resolve_attr(attr_tok.text, attr_tok.pos, CONDITION_ATTRS)
            if attr not in NAMED_ATTRS:
                raise PatternTypeError(f"isNamed applies to vname/cname, not {attr!r}", attr_tok.pos)
            self.expect(")")
            return IsNamed(attr)
        if tok.kind != "ident":
            raise PatternSyntaxError(f"expected condition, found {tok.text or 'end of input'!r}", tok.pos)
        attr = _resolve_attr(tok.text, tok.pos, CONDITION_ATTRS)
        op_tok = self.next()
        op = op_tok.text
        if op_tok.kind == "op":
            pass
        elif op in ("in", "notin", "contains", "notcontains"):
            pass
        else:
            raise PatternSyntaxError(f"expected operator after {attr!r}, found {op!r}", op_tok.pos)
        value = self.value(allow_list=op in SET_OPS)
        _check_condition(attr, op, value, op_tok.pos)
        return Cmp(attr, op, value)

    def value(self, allow_list: bool):
        tok = self.next()
        if tok.text == "[":
            if not allow_list:
                raise PatternTypeError("list value only allowed with in/notin", tok.pos)
            items = []
            if self.peek().text != "]":
                items.append(self.scalar_value(self.next()))
                while self.peek().text == ",":
                    self.next()
                    items.append(self.scalar_value(self.next()))
            self.expect("]")
            return tuple(items)
        return self.scalar_value(tok)

    def scalar_value(self, tok: _Tok):
        if tok.kind == "num":
            return int(tok.text)
        if tok.kind == "str":
            return tok.text[1:-1].replace("\\'", "'")
        if tok.kind == "ident":
            return tok.text
        raise PatternSyntaxError(f"expected value, found {tok.text or 'end of input'!r}", tok.pos)

    # action := current(...) | call(proc) | call proc(args) | proc(args)
    def action(self):
        tok = self.next()
        if tok.text == "current":
            self.expect("(")
            items = []
            if self.peek().text != ")":
                items.append(self.current_item())
                while self.peek().text in (",", "and"):
                    self.next()
                    items.append(self.current_item())
            self.expect(")")
            return Current(tuple(items))
        if tok.text == "call":
            if self.peek().text == "(":
                self.next()
                proc_tok = self.expect_ident("procedure name")
                args = self.maybe_args()
                self.expect(")")
                return Call(proc_tok.text, args)
            proc_tok = self.expect_ident("procedure name")
            return Call(proc_tok.text, self.maybe_args())
        if tok.kind == "ident":
            # bare procedure call sugar, e.g. refreshViewer(void)
            return Call(tok.text, self.maybe_args())
        raise PatternSyntaxError(f"expected action, found {tok.text or 'end of input'!r}", tok.pos)

    def maybe_args(self) -> tuple:
        if self.peek().text != "(":
            return ()
        self.next()
        args = []
        if self.peek().text != ")":
            args.append(self.arg())
            while self.peek().text == ",":
                self.next()
                args.append(self.arg())
        self.expect(")")
        return tuple(a for a in args if a != "void")

    def arg(self) -> str:
        tok = self.expect_ident("argument")
        if tok.text != "void" and not _VARNAME_RE.match(tok.text):
            raise PatternSyntaxError(f"argument {tok.text!r} is not a binding variable", tok.pos)
        return tok.text

    def current_item(self):
        attr_tok = self.expect_ident("attribute")
        attr = _resolve_attr(attr_tok.text, attr_tok.pos, REQUEST_ATTRS)
        if self.peek().text == "=":
            self.next()
            var_tok = self.expect_ident("binding variable")
            if not _VARNAME_RE.match(var_tok.text):
                raise PatternSyntaxError(
                    f"binding variable {var_tok.text!r} must start uppercase", var_tok.pos
                )
            return (attr, var_tok.text)
        return (attr, None)


def _resolve_attr(name: str, pos: int, allowed: Sequence[str]) -> str:
    attr = ATTR_ALIASES.get(name, name)
    if attr not in allowed:
        raise PatternTypeError(f"unknown attribute {name!r}", pos)
    return attr


def _check_condition(attr: str, op: str, value, pos: int) -> None:
    def scalar_ok(v) -> bool:
        if attr in INT_ATTRS:
            return isinstance(v, int)
        if attr == "port":
            if not isinstance(v, str):
                return False
            if v not in PORT_SET:
                raise PatternTypeError(f"{v!r} is not a port name", pos)
            return True
        if attr in STRING_ATTRS:
            return isinstance(v, str)
        return False

    if op in ORDER_OPS:
        if attr not in INT_ATTRS or not isinstance(value, int):
            raise PatternTypeError(f"ordering operator {op!r} needs an integer attribute", pos)
    elif op in EQ_OPS:
        if attr in DOMAIN_COND_ATTRS:
            raise PatternTypeError(f"{op!r} is not defined on domain attribute {attr!r}", pos)
        if not scalar_ok(value):
            raise PatternTypeError(f"type mismatch: {attr} {op} {value!r}", pos)
    elif op in SET_OPS:
        if not isinstance(value, tuple):
            raise PatternTypeError(f"{op!r} needs a bracketed list", pos)
        if attr in DOMAIN_COND_ATTRS:
            raise PatternTypeError(f"{op!r} is not defined on domain attribute {attr!r}", pos)
        for v in value:
            if not scalar_ok(v):
                raise PatternTypeError(f"type mismatch in list: {attr} {op} {v!r}", pos)
    elif op in CONTAIN_OPS:
        if attr not in DOMAIN_COND_ATTRS or not isinstance(value, int):
            raise PatternTypeError(f"{op!r} needs a domain attribute and integer value", pos)
    else:
        raise PatternSyntaxError(f"unknown operator {op!r}", pos)


def parse_pattern(text: str) -> Pattern:
    """Parse one pattern; raises PatternSyntaxError/PatternTypeError."""
    pattern = _Parser(text).pattern()
    bound = set(pattern.bindings())
    for action in pattern.actions:
        if isinstance(action, Call):
            for arg in action.args:
                if arg not in bound:
                    raise PatternTypeError(
                        f"call argument {arg!r} is not bound by any current(...) in {pattern.label!r}"
                    )
    if not pattern.actions:
        raise PatternSyntaxError("pattern needs at least one action")
    return pattern


def parse_pattern_file(text: str) -> list[Pattern]:
    """Parse a pattern file: '%' comments, each pattern ended by '.' alone."""
    chunks: list[str] = []
    current: list[str] = []
    for raw in text.splitlines():
        line = raw.split("%", 1)[0].rstrip()
        if line.strip() == ".":
            if current:
                chunks.append("\n".join(current))
                current = []
            continue
        if line.strip():
            current.append(line)
    if current:
        chunks.append("\n".join(current))
    return [parse_pattern(chunk) for chunk in chunks]


# -- evaluation ---------------------------------------------------------

def eval_formula(formula, provider: Callable[[str], object]) -> bool:
    """Evaluate against an attribute provider (value or ABSENT per attribute).

    Elementary conditions on absent attributes are false; negation is
    classical on the resulting boolean.
    """
    if isinstance(formula, TrueCond):
        return True
    if isinstance(formula, Not):
        return not eval_formula(formula.inner, provider)
    if isinstance(formula, And):
        return eval_formula(formula.left, provider) and eval_formula(formula.right, provider)
    if isinstance(formula, Or):
        return eval_formula(formula.left, provider) or eval_formula(formula.right, provider)
    if isinstance(formula, IsNamed):
        return provider(formula.attr) is not ABSENT
    cond: Cmp = formula
    value = provider(cond.attr)
    if value is ABSENT:
        return False
    op = cond.op
    if op == "=":
        return value == cond.value
    if op == "\\=":
        return value != cond.value
    if op == "<":
        return value < cond.value
    if op == ">":
        return value > cond.value
    if op == ">=":
        return value >= cond.value
    if op == "=<":
        return value <= cond.value
    if op == "in":
        return value in cond.value
    if op == "notin":
        return value not in cond.value
    if op == "contains":
        return value.contains(cond.value)
    if op == "notcontains":
        return not value.contains(cond.value)
    raise AssertionError(f"unreachable operator {op!r}")


def eval_with_port(formula, port: str):
    """Three-valued evaluation with only the port known.

    Returns True/False when decidable, None when other attributes would be
    needed.  Used to build the per-port pre-filter.
    """
    if isinstance(formula, TrueCond):
        return True
    if isinstance(formula, Not):
        inner = eval_with_port(formula.inner, port)
        return None if inner is None else not inner
    if isinstance(formula, And):
        left = eval_with_port(formula.left, port)
        if left is False:
            return False
        right = eval_with_port(formula.right, port)
        if right is False:
            return False
        if left is True and right is True:
            return True
        return None
    if isinstance(formula, Or):
        left = eval_with_port(formula.left, port)
        if left is True:
            return True
        right = eval_with_port(formula.right, port)
        if right is True:
            return True
        if left is False and right is False:
            return False
        return None
    if isinstance(formula, IsNamed):
        return None
    cond: Cmp = formula
    if cond.attr != "port":
        return None
    if cond.op == "=":
        return port == cond.value
    if cond.op == "\\=":
        return port != cond.value
    if cond.op == "in":
        return port in cond.value
    if cond.op == "notin":
        return port not in cond.value
    return None


def required_attributes(formula) -> list[str]:
    """Attributes referenced by the formula, ordered cheapest-first."""
    found: list[str] = []

    def walk(node):
        if isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Not):
            walk(node.inner)
        elif isinstance(node, Cmp):
            found.append(node.attr)
        elif isinstance(node, IsNamed):
            found.append(node.attr)

    walk(formula)
    return order_attributes(found)


# -- formatting ---------------------------------------------------------

def _format_scalar(attr: str, value) -> str:
    if isinstance(value, int):
        return str(value)
    if attr == "port":
        return value
    if _BARE_RE.match(value) and value not in _KEYWORDS:
        return f"'{value}'"
    return "'" + value.replace("'", "\\'") + "'"


def _format_value(attr: str, value) -> str:
    if isinstance(value, tuple):
        return "[" + ",".join(_format_scalar(attr, v) for v in value) + "]"
    return _format_scalar(attr, value)


_PREC = {Or: 1, And: 2, Not: 3}


def _format_formula(node, parent_prec: int = 0) -> str:
    if isinstance(node, TrueCond):
        return "true"
    if isinstance(node, IsNamed):
        return f"isNamed({node.attr})"
    if isinstance(node, Cmp):
        if node.op in ("in", "notin", "contains", "notcontains"):
            return f"{node.attr} {node.op} {_format_value(node.attr, node.value)}"
        return f"{node.attr}{node.op}{_format_value(node.attr, node.value)}"
    prec = _PREC[type(node)]
    if isinstance(node, Not):
        text = f"not {_format_formula(node.inner, prec)}"
    else:
        joiner = " or " if isinstance(node, Or) else " and "
        text = _format_formula(node.left, prec) + joiner + _format_formula(node.right, prec + 1)
    if prec < parent_prec:
        return f"({text})"
    return text


def _format_action(action) -> str:
    if isinstance(action, Current):
        items = ", ".join(
            attr if var is None else f"{attr}={var}" for attr, var in action.items
        )
        return f"current({items})"
    if action.args:
        return f"call {action.proc}(" + ",".join(action.args) + ")"
    return f"call({action.proc})"


def format_pattern(p: Pattern) -> str:
    """Canonical one-line text; parse(format(p)) is structurally p."""
    sync = "do_synchro" if p.sync else "do"
    actions = ", ".join(_format_action(a) for a in p.actions)
    return f"{p.label}: when {_format_formula(p.formula)} {sync} {actions}"
