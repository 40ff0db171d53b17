"""Render expressions back into the input grammar."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .expr import ADD, CONST, FUNC, INPUT, MUL, POW, STATE, Expr

# binding strength, higher binds tighter
_PREC = {ADD: 1, MUL: 2, POW: 3}


def _const_text(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def _exp_text(ex: Fraction) -> str:
    if ex.denominator == 1 and ex >= 0:
        return str(ex.numerator)
    if ex.denominator == 1:
        return f"({ex.numerator})"
    return f"({ex.numerator}/{ex.denominator})"


def to_text(
    e: Expr,
    state_names: Sequence[str] | None = None,
    input_names: Sequence[str] | None = None,
) -> str:
    def name(kind: int, i: int) -> str:
        if kind == STATE:
            return state_names[i] if state_names else f"x{i + 1}"
        return input_names[i] if input_names else f"u{i + 1}"

    def go(node: Expr, parent: int) -> str:
        k = node.kind
        if k == CONST:
            c = node.value
            s = _const_text(abs(c))
            if c < 0:
                s = "-" + s
                return f"({s})" if parent >= _PREC[MUL] else s
            return s
        if k in (STATE, INPUT):
            return name(k, node.value)
        if k == FUNC:
            return f"{node.value}({go(node.args[0], 0)})"
        if k == POW:
            b = go(node.args[0], _PREC[POW])
            s = f"{b}^{_exp_text(node.value)}"
            return f"({s})" if parent >= _PREC[POW] else s
        if k == MUL:
            s = _mul_text(node, go)
            return f"({s})" if parent >= _PREC[MUL] else s
        # ADD
        parts: list[str] = []
        for i, a in enumerate(node.args):
            neg, body = _signed(a, go)
            if i == 0:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        s = "".join(parts)
        return f"({s})" if parent >= _PREC[ADD] else s

    return go(e, 0)


def _mul_text(node: Expr, go) -> str:
    args = node.args
    lead = ""
    if args[0].kind == CONST and args[0].value == -1:
        lead = "-"
        args = args[1:]
    body = "*".join(go(a, _PREC[MUL]) for a in args)
    return lead + body


def _signed(a: Expr, go) -> tuple[bool, str]:
    """Split a leading negative coefficient off a summand."""
    if a.kind == CONST and a.value < 0:
        return True, _const_text(-a.value)
    if a.kind == MUL and a.args[0].kind == CONST and a.args[0].value < 0:
        c = -a.args[0].value
        rest = a.args[1:]
        body = "*".join(go(x, _PREC[MUL]) for x in rest)
        if c != 1:
            body = _const_text(c) + "*" + body
        return True, body
    return False, go(a, _PREC[ADD])
