"""Compile expression vectors into straight-line Python functions.

Two flavours share one code generator:

* scalar: plain floats through :mod:`math`; domain violations raise
  :class:`DomainError`.  Used in per-step inner loops (RK4, Newton).
* vector: numpy arrays, ``x[..., i]`` indexing so both a single point and a
  batch of shape (N, n) work; domain violations become NaN.

Shared subtrees (guaranteed shared by hash-consing) are computed once.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .calculus import rpow
from .expr import ADD, CONST, FUNC, INPUT, MUL, POW, STATE, DomainError, Expr, walk


def _rpow_vec(x, p, q):
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        if q == 1:
            out = np.power(x, float(p)) if p >= 0 else np.where(x == 0, np.nan, np.power(x, float(p)))
            return out
        a = np.abs(x)
        if q == 2:
            mag = np.power(np.sqrt(a), float(p))
        elif q == 3:
            mag = np.power(np.cbrt(a), float(p))
        else:
            mag = np.power(a, p / q)
        if q % 2 == 0:
            return np.where(x < 0, np.nan, mag)
        if p < 0:
            mag = np.where(x == 0, np.nan, mag)
        if p % 2:
            return np.where(x < 0, -mag, mag)
        return mag


def _log_scalar(v):
    if v <= 0:
        raise DomainError(f"log of nonpositive number {v!r}")
    return math.log(v)


def _sign(v):
    return float((v > 0) - (v < 0))


def _log_vec(v):
    with np.errstate(all="ignore"):
        v = np.asarray(v, dtype=float)
        return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), np.nan)


_SCALAR_NS = {
    "_rpow": rpow,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": _log_scalar,
    "abs": abs,
    "sign": _sign,
}

_VECTOR_NS = {
    "_rpow": _rpow_vec,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": _log_vec,
    "abs": np.abs,
    "sign": np.sign,
}


def _const_src(c: Fraction) -> str:
    return repr(float(c))


def _source(exprs: Sequence[Expr], vector: bool) -> str:
    nodes: list[Expr] = []
    seen: set[int] = set()
    for e in exprs:
        for node in walk(e):
            if id(node) not in seen:
                seen.add(id(node))
                nodes.append(node)
    names: dict[int, str] = {}
    lines = ["def _compiled(x, u):"]
    k = 0
    for node in nodes:
        kind = node.kind
        if kind == CONST:
            names[id(node)] = _const_src(node.value)
            continue
        if kind == STATE:
            rhs = f"x[..., {node.value}]" if vector else f"x[{node.value}]"
        elif kind == INPUT:
            rhs = f"u[..., {node.value}]" if vector else f"u[{node.value}]"
        elif kind == ADD:
            rhs = " + ".join(names[id(a)] for a in node.args)
        elif kind == MUL:
            rhs = " * ".join(names[id(a)] for a in node.args)
        elif kind == POW:
            ex: Fraction = node.value
            rhs = f"_rpow({names[id(node.args[0])]}, {ex.numerator}, {ex.denominator})"
        elif kind == FUNC:
            rhs = f"{node.value}({names[id(node.args[0])]})"
        else:  # pragma: no cover
            raise AssertionError(kind)
        name = f"t{k}"
        k += 1
        lines.append(f"    {name} = {rhs}")
        names[id(node)] = name
    outs = ", ".join(names[id(e)] for e in exprs)
    lines.append(f"    return ({outs}{',' if len(exprs) == 1 else ''})")
    return "\n".join(lines)


def compile_scalar(exprs: Sequence[Expr]) -> Callable[[Sequence[float], Sequence[float]], tuple]:
    """Return ``fn(x, u) -> tuple of floats``; raises DomainError."""
    src = _source(list(exprs), vector=False)
    ns = dict(_SCALAR_NS)
    exec(compile(src, "<triobs-scalar>", "exec"), ns)
    raw = ns["_compiled"]

    def fn(x, u=()):
        try:
            return raw(x, u)
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise DomainError(str(exc)) from exc

    fn.source = src
    return fn


def compile_vector(exprs: Sequence[Expr]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return ``fn(X, U) -> array (..., len(exprs))``; NaN marks domain errors."""
    exprs = list(exprs)
    src = _source(exprs, vector=True)
    ns = dict(_VECTOR_NS)
    exec(compile(src, "<triobs-vector>", "exec"), ns)
    raw = ns["_compiled"]

    def fn(X, U=None):
        X = np.asarray(X, dtype=float)
        if U is None:
            U = np.zeros(X.shape[:-1] + (1,))
        U = np.asarray(U, dtype=float)
        with np.errstate(all="ignore"):
            cols = raw(X, U)
        shape = np.broadcast_shapes(X.shape[:-1], U.shape[:-1])
        out = np.empty(shape + (len(exprs),))
        for j, c in enumerate(cols):
            out[..., j] = c
        out[~np.isfinite(out)] = np.nan
        return out

    fn.source = src
    return fn
