"""Recursive-descent parser for expressions and system files.

Expression grammar::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | factor
    factor   := atom ["^" rational]
    rational := integer | "-" integer | "(" ["-"] integer ["/" integer] ")"
    atom     := number | identifier | "(" expr ")" | func "(" expr ")"
    func     := sin | cos | exp | log | cbrt | abs | sign

System files are line oriented::

    system example1
    states x1 x2 x3
    inputs u
    f = [x2, x3^3, 1]
    g = [[0], [0], [1]]
    h = x1

``#`` starts a comment.  A bracketed value may continue over several lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .expr import (
    FUNCTIONS,
    Expr,
    ExprError,
    add,
    call,
    const,
    inp,
    mul,
    neg,
    power,
    state,
)


class ParseError(ExprError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


class SystemDefinitionError(ExprError):
    """A structurally invalid system definition (dimensions, names)."""


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),\[\]]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | id | op | end
    text: str
    pos: int


def _tokenize(text: str, line: int, col0: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", line, col0 + bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, states, inputs, line=1, col0=1):
        self.text = text
        self.toks = _tokenize(text, line, col0)
        self.i = 0
        self.states = {name: k for k, name in enumerate(states)}
        self.inputs = {name: k for k, name in enumerate(inputs)}
        self.line = line
        self.col0 = col0

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        if tok.kind == "end":
            msg = f"{msg}: unexpected end of input"
        raise ParseError(msg, self.line, self.col0 + tok.pos)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, op: str) -> bool:
        tok = self.peek()
        if tok.kind == "op" and tok.text == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str):
        if not self.accept(op):
            self.error(f"expected {op!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek().kind != "end":
            self.error("unexpected token " + repr(self.peek().text))
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while True:
            if self.accept("+"):
                terms.append(self.term())
            elif self.accept("-"):
                terms.append(neg(self.term()))
            else:
                break
        return terms[0] if len(terms) == 1 else add(*terms)

    def term(self) -> Expr:
        factors = [self.unary()]
        while True:
            if self.accept("*"):
                factors.append(self.unary())
            elif self.accept("/"):
                factors.append(power(self.unary(), -1))
            else:
                break
        return factors[0] if len(factors) == 1 else mul(*factors)

    def unary(self) -> Expr:
        if self.accept("-"):
            return neg(self.unary())
        return self.factor()

    def factor(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return power(base, self.rational())
        return base

    def integer(self, sign: int = 1) -> int:
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.error("exponent must be a rational constant p or (p/q)")
        self.take()
        return sign * int(tok.text)

    def rational(self) -> Fraction:
        if self.accept("("):
            sign = -1 if self.accept("-") else 1
            p = self.integer(sign)
            q = 1
            if self.accept("/"):
                tok = self.peek()
                q = self.integer()
                if q == 0:
                    self.error("zero denominator in exponent", tok)
            self.expect(")")
            return Fraction(p, q)
        if self.accept("-"):
            return Fraction(self.integer(-1))
        return Fraction(self.integer())

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return const(Fraction(tok.text))
        if tok.kind == "id":
            self.take()
            name = tok.text
            if name in FUNCTIONS and self.peek().text == "(":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return call(name, arg)
            if name in self.states:
                return state(self.states[name])
            if name in self.inputs:
                return inp(self.inputs[name])
            self.error(f"unknown identifier {name!r}", tok)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected a number, identifier or '('")


def _default_names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{k + 1}" for k in range(count)]


def parse_expression(
    text: str,
    vars: Sequence[str] | None = None,
    inputs: Sequence[str] | None = None,
    *,
    line: int = 1,
    col: int = 1,
) -> Expr:
    """Parse ``text`` into a (simplified) expression tree.

    ``vars`` names the states in index order; ``None`` accepts x1, x2, ...
    up to x99.  ``inputs`` likewise names the input variables.
    """
    if vars is None:
        vars = _default_names("x", 99)
    if inputs is None:
        inputs = _default_names("u", 9)
    clash = set(vars) & set(inputs)
    if clash:
        raise ParseError(f"name used for both a state and an input: {sorted(clash)}")
    return _Parser(text, list(vars), list(inputs), line, col).parse()


# --------------------------------------------------------------------------
# system files


def _split_top(text: str, line: int, col: int) -> list[tuple[str, int]]:
    """Split on commas at bracket depth zero; returns (piece, column)."""
    pieces = []
    depth = 0
    start = 0
    for k, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced bracket", line, col + k)
        elif ch == "," and depth == 0:
            pieces.append((text[start:k], col + start))
            start = k + 1
    if depth != 0:
        raise ParseError("unbalanced bracket", line, col + len(text))
    pieces.append((text[start:], col + start))
    return pieces


def _strip_brackets(text: str, line: int, col: int) -> tuple[str, int]:
    s = text.strip()
    lead = len(text) - len(text.lstrip())
    if not (s.startswith("[") and s.endswith("]")):
        raise ParseError("expected a bracketed list", line, col + lead)
    return s[1:-1], col + lead + 1


def parse_system(text: str):
    """Parse a system file into a :class:`ControlAffineSystem`."""
    from .system import ControlAffineSystem

    name = "system"
    states: list[str] | None = None
    inputs: list[str] | None = None
    bodies: dict[str, tuple[str, int, int]] = {}

    # join continuation lines while brackets are open
    logical: list[tuple[str, int]] = []
    buf, buf_line, depth = "", 0, 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not buf:
            buf_line = lineno
        buf = (buf + " " + line) if buf else line
        depth += line.count("[") + line.count("(") - line.count("]") - line.count(")")
        if depth <= 0:
            if buf.strip():
                logical.append((buf, buf_line))
            buf, depth = "", 0
    if buf.strip():
        raise ParseError("unterminated bracket", buf_line, len(buf))

    for body, lineno in logical:
        stripped = body.strip()
        head = stripped.split(None, 1)[0]
        col = body.index(head) + 1
        if head == "system":
            parts = stripped.split()
            if len(parts) != 2:
                raise ParseError("expected 'system <name>'", lineno, col)
            name = parts[1]
        elif head in ("states", "inputs"):
            names = stripped.split()[1:]
            if not names:
                raise ParseError(f"'{head}' needs at least one name", lineno, col)
            for nm in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", nm) or nm in FUNCTIONS:
                    raise ParseError(f"invalid variable name {nm!r}", lineno, col)
            if len(set(names)) != len(names):
                raise SystemDefinitionError(f"duplicate variable names in '{head}' (line {lineno})")
            if head == "states":
                states = names
            else:
                inputs = names
        else:
            m = re.match(r"\s*([fgh])\s*=", body)
            if m is None:
                raise ParseError(f"unrecognised statement {head!r}", lineno, col)
            key = m.group(1)
            if key in bodies:
                raise ParseError(f"'{key}' defined twice", lineno, col)
            bodies[key] = (body[m.end() :], lineno, m.end() + 1)

    if states is None:
        raise SystemDefinitionError("missing 'states' declaration")
    if inputs is None:
        raise SystemDefinitionError("missing 'inputs' declaration")
    dup = set(states) & set(inputs)
    if dup:
        raise SystemDefinitionError(f"duplicate variable names: {sorted(dup)}")
    for key in "fgh":
        if key not in bodies:
            raise SystemDefinitionError(f"missing '{key} = ...' definition")
    n, m = len(states), len(inputs)

    def expr_at(src: str, lineno: int, col: int) -> Expr:
        lead = len(src) - len(src.lstrip())
        return parse_expression(src.strip(), states, inputs, line=lineno, col=col + lead)

    src, lineno, col = bodies["f"]
    inner, icol = _strip_brackets(src, lineno, col)
    f = [expr_at(p, lineno, c) for p, c in _split_top(inner, lineno, icol)]
    if len(f) != n:
        raise SystemDefinitionError(f"f has {len(f)} entries but {n} states are declared")

    src, lineno, col = bodies["g"]
    inner, icol = _strip_brackets(src, lineno, col)
    rows = _split_top(inner, lineno, icol)
    if len(rows) != n:
        raise SystemDefinitionError(f"g has {len(rows)} rows but {n} states are declared")
    g = []
    for rsrc, rcol in rows:
        rin, ricol = _strip_brackets(rsrc, lineno, rcol)
        row = [expr_at(p, lineno, c) for p, c in _split_top(rin, lineno, ricol)]
        if len(row) != m:
            raise SystemDefinitionError(f"g row has {len(row)} entries but {m} inputs are declared")
        g.append(tuple(row))

    src, lineno, col = bodies["h"]
    h = expr_at(src, lineno, col)

    return ControlAffineSystem(
        name=name,
        state_names=tuple(states),
        input_names=tuple(inputs),
        f=tuple(f),
        g=tuple(g),
        h=h,
    )

