"""Immutable, hash-consed expression trees.

Every node is interned, so structural equality is identity and ``a is b``
(or ``a == b``) is the cheap comparison used throughout simplification.
The public constructors (:func:`add`, :func:`mul`, :func:`power`,
:func:`call`) apply a light, terminating set of rewrites on the fly, so any
tree built through them is already in simplify-normal form.  The ``raw_*``
constructors skip the rewrites; they exist for tests and for building
deliberately unsimplified trees.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

CONST = 0
STATE = 1
INPUT = 2
POW = 3
FUNC = 4
MUL = 5
ADD = 6

FUNCTIONS = ("sin", "cos", "exp", "log", "cbrt", "abs", "sign")


class ExprError(Exception):
    """Base class for expression-language errors."""


class DomainError(ExprError, ArithmeticError):
    """Raised when an expression is evaluated outside its real domain."""


class Expr:
    """A node of the expression tree.

    ``kind`` is one of the module-level kind codes.  ``value`` carries the
    payload: the constant (a :class:`~fractions.Fraction`), the variable
    index, the exponent of a power node, or the function name.
    """

    __slots__ = ("kind", "value", "args", "_key", "__weakref__")

    kind: int
    value: object
    args: tuple["Expr", ...]

    def __new__(cls, *a, **k):  # pragma: no cover - guarded constructor
        raise TypeError("use the module constructors to build Expr nodes")

    @property
    def sort_key(self) -> tuple:
        return self._key

    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    def __repr__(self) -> str:
        from .printer import to_text

        return f"Expr({to_text(self)!r})"

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)

    def __reduce__(self):
        from .printer import to_text

        return (_unpickle, (to_text(self),))

    # arithmetic sugar, handy in tests and in the Lie calculus
    def __add__(self, other):
        return add(self, as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


def _unpickle(text: str) -> Expr:
    # printer uses the default names x1.., u1..
    from .parser import parse_expression

    return parse_expression(text, None)


_TABLE: dict[tuple, Expr] = {}


def _intern(kind: int, value, args: tuple[Expr, ...]) -> Expr:
    key = (kind, value, args)
    node = _TABLE.get(key)
    if node is not None:
        return node
    node = object.__new__(Expr)
    object.__setattr__(node, "kind", kind)
    object.__setattr__(node, "value", value)
    object.__setattr__(node, "args", args)
    if kind == CONST:
        sk: tuple = (CONST, value)
    elif kind in (STATE, INPUT):
        sk = (kind, value)
    elif kind == POW:
        sk = (POW, args[0]._key, value)
    elif kind == FUNC:
        sk = (FUNC, value, args[0]._key)
    else:
        sk = (kind, len(args)) + tuple(a._key for a in args)
    object.__setattr__(node, "_key", sk)
    _TABLE[key] = node
    return node


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ExprError(f"non-finite constant {v!r}")
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot make a constant from {type(v).__name__}")


def const(v) -> Expr:
    return _intern(CONST, _frac(v), ())


def state(index: int) -> Expr:
    """State variable by zero-based index."""
    if index < 0:
        raise ExprError("variable index must be nonnegative")
    return _intern(STATE, int(index), ())


def inp(index: int) -> Expr:
    """Input variable by zero-based index."""
    if index < 0:
        raise ExprError("variable index must be nonnegative")
    return _intern(INPUT, int(index), ())


def as_expr(v) -> Expr:
    return v if isinstance(v, Expr) else const(v)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)


# --------------------------------------------------------------------------
# raw constructors (no rewriting)


def raw_add(*args: Expr) -> Expr:
    if len(args) < 2:
        raise ExprError("raw_add needs at least two operands")
    return _intern(ADD, None, tuple(args))


def raw_mul(*args: Expr) -> Expr:
    if len(args) < 2:
        raise ExprError("raw_mul needs at least two operands")
    return _intern(MUL, None, tuple(args))


def raw_pow(base: Expr, exponent) -> Expr:
    return _intern(POW, _frac(exponent), (base,))


def raw_call(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    return _intern(FUNC, name, (arg,))


# --------------------------------------------------------------------------
# simplifying constructors


def _split_coeff(e: Expr) -> tuple[Fraction, Expr]:
    if e.kind == CONST:
        return e.value, ONE
    if e.kind == MUL and e.args[0].kind == CONST:
        rest = e.args[1:]
        return e.args[0].value, rest[0] if len(rest) == 1 else _intern(MUL, None, rest)
    return Fraction(1), e


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        t = as_expr(t)
        if t.kind == ADD:
            flat.extend(t.args)
        else:
            flat.append(t)
    constant = Fraction(0)
    coeffs: dict[Expr, Fraction] = {}
    for t in flat:
        if t.kind == CONST:
            constant += t.value
            continue
        c, rest = _split_coeff(t)
        coeffs[rest] = coeffs.get(rest, Fraction(0)) + c
    out = []
    for rest, c in coeffs.items():
        if c == 0:
            continue
        out.append(rest if c == 1 else mul(const(c), rest))
    out.sort(key=lambda e: e._key)
    if constant != 0:
        out.insert(0, const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return _intern(ADD, None, tuple(out))


def neg(e: Expr) -> Expr:
    return mul(MINUS_ONE, e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def _base_exp(e: Expr) -> tuple[Expr, Fraction]:
    if e.kind == POW:
        return e.args[0], e.value
    return e, Fraction(1)


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    for f in factors:
        f = as_expr(f)
        if f.kind == MUL:
            flat.extend(f.args)
        else:
            flat.append(f)
    coeff = Fraction(1)
    merged: dict[Expr, Fraction] = {}
    unmerged: list[Expr] = []
    for f in flat:
        if f.kind == CONST:
            coeff *= f.value
            continue
        base, ex = _base_exp(f)
        # odd-root semantics make x^a * x^b = x^(a+b) exact only when both
        # denominators are odd
        if ex.denominator % 2 == 1:
            merged[base] = merged.get(base, Fraction(0)) + ex
        else:
            unmerged.append(f)
    if coeff == 0:
        return ZERO
    out: list[Expr] = []
    for base, ex in merged.items():
        p = power(base, ex)
        if p.kind == CONST:
            coeff *= p.value
        elif p.kind == MUL:
            # power() never distributes, but a folded constant root can
            # come back as c * rest
            for a in p.args:
                if a.kind == CONST:
                    coeff *= a.value
                else:
                    out.append(a)
        else:
            out.append(p)
    out.extend(unmerged)
    if coeff == 0:
        return ZERO
    out.sort(key=lambda e: e._key)
    if coeff != 1:
        out.insert(0, const(coeff))
    if not out:
        return const(coeff)
    if len(out) == 1:
        return out[0]
    return _intern(MUL, None, tuple(out))


def _int_root(n: int, q: int) -> int | None:
    if n < 0:
        if q % 2 == 0:
            return None
        r = _int_root(-n, q)
        return None if r is None else -r
    if n in (0, 1):
        return n
    r = round(n ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**q == n:
            return cand
    return None


def _const_power(c: Fraction, ex: Fraction) -> Fraction | None:
    if c == 0:
        return Fraction(0) if ex > 0 else None
    p, q = ex.numerator, ex.denominator
    if q == 1:
        return c**p
    if c < 0 and q % 2 == 0:
        return None
    a = _int_root(c.numerator, q)
    b = _int_root(c.denominator, q)
    if a is None or b is None:
        return None
    return Fraction(a, b) ** p


def power(base: Expr, exponent) -> Expr:
    base = as_expr(base)
    ex = _frac(exponent)
    if ex == 0:
        return ONE
    if ex == 1:
        return base
    if base.kind == CONST:
        folded = _const_power(base.value, ex)
        if folded is not None:
            return const(folded)
        return _intern(POW, ex, (base,))
    if base.kind == POW:
        inner = base.value
        q_in, q_out = inner.denominator, ex.denominator
        # (x^a)^b -> x^(ab) is exact when both roots are odd, or when the
        # inner root is even (domain already forces x >= 0)
        if (q_in % 2 == 1 and q_out % 2 == 1) or q_in % 2 == 0:
            return power(base.args[0], inner * ex)
    return _intern(POW, ex, (base,))


def call(name: str, arg: Expr) -> Expr:
    arg = as_expr(arg)
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if name == "cbrt":
        return power(arg, Fraction(1, 3))
    if arg.kind == CONST:
        v = arg.value
        if name in ("sin",) and v == 0:
            return ZERO
        if name == "cos" and v == 0:
            return ONE
        if name == "exp" and v == 0:
            return ONE
        if name == "log" and v == 1:
            return ZERO
        if name == "abs":
            return const(abs(v))
        if name == "sign":
            return const((v > 0) - (v < 0))
    if name == "abs" and arg.kind == FUNC and arg.value == "abs":
        return arg
    return _intern(FUNC, name, (arg,))


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the simplifying constructors."""
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        k = node.kind
        if k in (CONST, STATE, INPUT):
            out = node
        elif k == ADD:
            out = add(*(go(a) for a in node.args))
        elif k == MUL:
            out = mul(*(go(a) for a in node.args))
        elif k == POW:
            out = power(go(node.args[0]), node.value)
        else:
            out = call(node.value, go(node.args[0]))
        memo[node] = out
        return out

    return go(e)


# --------------------------------------------------------------------------
# traversal helpers


def walk(e: Expr) -> Iterable[Expr]:
    """Yield each distinct node once, children before parents."""
    seen: set[int] = set()
    order: list[Expr] = []
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not node.args:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))
    return order


def max_state_index(e: Expr) -> int:
    return max((n.value for n in walk(e) if n.kind == STATE), default=-1)


def uses_inputs(e: Expr) -> bool:
    return any(n.kind == INPUT for n in walk(e))


def substitute_inputs(e: Expr, values: Sequence[float]) -> Expr:
    """Replace every input variable by a numeric constant."""
    consts = [const(v) for v in values]
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        k = node.kind
        if k == INPUT:
            out = consts[node.value]
        elif k in (CONST, STATE):
            out = node
        elif k == ADD:
            out = add(*(go(a) for a in node.args))
        elif k == MUL:
            out = mul(*(go(a) for a in node.args))
        elif k == POW:
            out = power(go(node.args[0]), node.value)
        else:
            out = call(node.value, go(node.args[0]))
        memo[node] = out
        return out

    return go(e)


def size(e: Expr) -> int:
    return len(list(walk(e)))
