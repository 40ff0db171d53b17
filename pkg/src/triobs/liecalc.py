"""Symbolic Lie derivatives and the observability maps H_i.

H_i(x) = (h, L_f h, ..., L_f^{i-1} h).  Everything here is exact symbolic
algebra on :class:`~triobs.exprdsl.Expr`; numerics only enter through the
compiled evaluators attached to :class:`ObservabilityMap`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exprdsl import ControlAffineSystem, Expr, add, compile_scalar, compile_vector, differentiate, mul


def lie_f(sys: ControlAffineSystem, a: Expr) -> Expr:
    """L_f a = sum_j (da/dx_j) f_j."""
    return add(*(mul(differentiate(a, j), fj) for j, fj in enumerate(sys.f)))


def lie_g(sys: ControlAffineSystem, a: Expr) -> tuple[Expr, ...]:
    """Row of L_{g_k} a, one entry per input column of g."""
    grads = [differentiate(a, j) for j in range(sys.n)]
    return tuple(
        add(*(mul(grads[j], sys.g[j][k]) for j in range(sys.n))) for k in range(sys.m)
    )


class LieTable:
    """Memoised L_f^k h and L_g L_f^k h for one system."""

    def __init__(self, sys: ControlAffineSystem):
        self.sys = sys
        self._lf: list[Expr] = [sys.h]
        self._lg: dict[int, tuple[Expr, ...]] = {}

    def lf(self, k: int) -> Expr:
        """L_f^k h."""
        while len(self._lf) <= k:
            self._lf.append(lie_f(self.sys, self._lf[-1]))
        return self._lf[k]

    def lgf(self, k: int) -> tuple[Expr, ...]:
        """L_g L_f^k h (row of length m)."""
        row = self._lg.get(k)
        if row is None:
            row = self._lg[k] = lie_g(self.sys, self.lf(k))
        return row

    def dump(self, K: int) -> list[str]:
        t = self.sys.text
        lines = []
        for k in range(K + 1):
            lines.append(f"L_f^{k} h = {t(self.lf(k))}")
        for k in range(1, K + 1):
            row = ", ".join(t(e) for e in self.lgf(k - 1))
            lines.append(f"L_g L_f^{k - 1} h = [{row}]")
        return lines


def lie_table(sys: ControlAffineSystem) -> LieTable:
    table = sys._cache.get("lie")
    if table is None:
        table = sys._cache["lie"] = LieTable(sys)
    return table


@dataclass(frozen=True, eq=False)
class ObservabilityMap:
    """Symbolic H_i with its Jacobian, plus compiled evaluators."""

    order: int
    components: tuple[Expr, ...]
    jacobian: tuple[tuple[Expr, ...], ...]
    system: ControlAffineSystem

    @property
    def n(self) -> int:
        return self.system.n

    def text(self) -> list[str]:
        return [self.system.text(e) for e in self.components]

    @cached_property
    def _vec_values(self):
        return compile_vector(self.components)

    @cached_property
    def _vec_jac(self):
        return compile_vector([e for row in self.jacobian for e in row])

    @cached_property
    def _scalar_both(self):
        return compile_scalar(list(self.components) + [e for row in self.jacobian for e in row])

    @cached_property
    def _scalar_values(self):
        return compile_scalar(self.components)

    def __call__(self, X) -> np.ndarray:
        """H_i at one point (n,) or a batch (N, n); NaN marks domain errors."""
        return self._vec_values(X)

    def jac(self, X) -> np.ndarray:
        """Jacobian, shape (..., i, n)."""
        X = np.asarray(X, dtype=float)
        out = self._vec_jac(X)
        return out.reshape(X.shape[:-1] + (self.order, self.n))

    def value(self, x) -> np.ndarray:
        """Scalar-path value at a single point; raises DomainError."""
        return np.array(self._scalar_values(x), dtype=float)

    def value_and_jac(self, x) -> tuple[np.ndarray, np.ndarray]:
        vals = np.array(self._scalar_both(x), dtype=float)
        i = self.order
        return vals[:i], vals[i:].reshape(i, self.n)


def build_H(sys: ControlAffineSystem, i: int) -> ObservabilityMap:
    """Observability map of order ``i`` (cached per system)."""
    if i < 1:
        raise ValueError("order must be >= 1")
    cache = sys._cache.setdefault("H", {})
    hit = cache.get(i)
    if hit is not None:
        return hit
    table = lie_table(sys)
    comps = tuple(table.lf(k) for k in range(i))
    jac = tuple(tuple(differentiate(c, j) for j in range(sys.n)) for c in comps)
    cache[i] = ObservabilityMap(order=i, components=comps, jacobian=jac, system=sys)
    return cache[i]


def canonical_rhs_check(sys: ControlAffineSystem, i: int, x, u) -> float:
    """Max |dH_i/dx (f + g u) - (shift(H_i), L_f^i h) - L_g H_i u| at x.

    The two sides agree identically by the chain rule, so the result only
    measures floating-point noise.
    """
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    H = build_H(sys, i)
    table = lie_table(sys)
    _, J = H.value_and_jac(x)
    lhs = J @ sys.vector_field(x, u)
    extra = compile_scalar([table.lf(i)] + [e for k in range(i) for e in table.lgf(k)])
    vals = np.array(extra(x), dtype=float)
    comps = H.value(x)
    shift = np.append(comps[1:], vals[0])
    LgH = vals[1:].reshape(i, sys.m)
    rhs = shift + LgH @ u
    return float(np.max(np.abs(lhs - rhs)))
