"""Symbolic differentiation and reference (tree-walking) evaluation."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .expr import (
    ADD,
    CONST,
    FUNC,
    INPUT,
    MUL,
    ONE,
    POW,
    STATE,
    ZERO,
    DomainError,
    Expr,
    add,
    call,
    const,
    mul,
    neg,
    power,
)

_DIFF_CACHE: dict[tuple[Expr, int], Expr] = {}


def differentiate(e: Expr, var: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to state ``var``.

    Rational powers follow d/dx x^(p/q) = (p/q) x^(p/q - 1), which is
    consistent with odd-root semantics for odd q.
    """
    key = (e, var)
    hit = _DIFF_CACHE.get(key)
    if hit is not None:
        return hit
    k = e.kind
    if k in (CONST, INPUT):
        out = ZERO
    elif k == STATE:
        out = ONE if e.value == var else ZERO
    elif k == ADD:
        out = add(*(differentiate(a, var) for a in e.args))
    elif k == MUL:
        terms = []
        for i, a in enumerate(e.args):
            da = differentiate(a, var)
            if da is ZERO:
                continue
            terms.append(mul(da, *e.args[:i], *e.args[i + 1 :]))
        out = add(*terms) if terms else ZERO
    elif k == POW:
        base, ex = e.args[0], e.value
        db = differentiate(base, var)
        out = ZERO if db is ZERO else mul(const(ex), power(base, ex - 1), db)
    else:
        arg = e.args[0]
        da = differentiate(arg, var)
        if da is ZERO:
            out = ZERO
        else:
            name = e.value
            if name == "sin":
                outer = call("cos", arg)
            elif name == "cos":
                outer = neg(call("sin", arg))
            elif name == "exp":
                outer = e
            elif name == "log":
                outer = power(arg, -1)
            elif name == "abs":
                outer = call("sign", arg)
            else:  # sign: derivative zero away from the jump
                outer = ZERO
            out = mul(outer, da)
    _DIFF_CACHE[key] = out
    return out


def gradient(e: Expr, n: int) -> tuple[Expr, ...]:
    return tuple(differentiate(e, j) for j in range(n))


def _cbrt(a: float) -> float:
    # a >= 0; one Newton step removes the error of a ** (1/3)
    if a == 0.0 or a != a or a == math.inf:
        return a
    r = a ** (1.0 / 3.0)
    return r - (r * r * r - a) / (3.0 * r * r)


def rpow(x: float, p: int, q: int) -> float:
    """Real power x^(p/q) with odd-root semantics for odd q."""
    if x < 0 and q % 2 == 0:
        raise DomainError(f"even root of negative number {x!r}")
    if x == 0 and p < 0:
        raise DomainError("zero raised to a negative power")
    if q == 1:
        return x**p
    a = abs(x)
    if q == 2:
        r = math.sqrt(a) ** p
    elif q == 3:
        r = _cbrt(a) ** p
    else:
        r = a ** (p / q)
    return -r if (x < 0 and p % 2) else r


def _fn(name: str, v: float) -> float:
    if name == "sin":
        return math.sin(v)
    if name == "cos":
        return math.cos(v)
    if name == "exp":
        return math.exp(v)
    if name == "log":
        if v <= 0:
            raise DomainError(f"log of nonpositive number {v!r}")
        return math.log(v)
    if name == "abs":
        return abs(v)
    if name == "sign":
        return float((v > 0) - (v < 0))
    raise DomainError(f"unknown function {name}")  # pragma: no cover


def evaluate(e: Expr, x: Sequence[float], u: Sequence[float] = ()) -> float:
    """Evaluate ``e`` at state ``x`` (and input ``u``) in IEEE double.

    Raises :class:`DomainError` on even roots of negative numbers, log of
    nonpositive numbers, and division by zero.
    """
    memo: dict[int, float] = {}

    def go(node: Expr) -> float:
        key = id(node)
        if key in memo:
            return memo[key]
        k = node.kind
        if k == CONST:
            v = float(node.value)
        elif k == STATE:
            v = float(x[node.value])
        elif k == INPUT:
            v = float(u[node.value])
        elif k == ADD:
            v = 0.0
            for a in node.args:
                v += go(a)
        elif k == MUL:
            v = 1.0
            for a in node.args:
                v *= go(a)
        elif k == POW:
            ex: Fraction = node.value
            v = rpow(go(node.args[0]), ex.numerator, ex.denominator)
        else:
            v = _fn(node.value, go(node.args[0]))
        memo[key] = v
        return v

    try:
        return go(e)
    except (ZeroDivisionError, OverflowError) as exc:
        raise DomainError(str(exc)) from exc
