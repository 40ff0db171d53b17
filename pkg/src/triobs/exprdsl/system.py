from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .calculus import differentiate
from .codegen import compile_scalar, compile_vector
from .expr import Expr, max_state_index, uses_inputs
from .parser import SystemDefinitionError
from .printer import to_text


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """``xdot = f(x) + g(x) u``, ``y = h(x)``.

    ``f`` has n entries, ``g`` is n rows by m columns, ``h`` is scalar.
    """

    name: str
    state_names: tuple[str, ...]
    input_names: tuple[str, ...]
    f: tuple[Expr, ...]
    g: tuple[tuple[Expr, ...], ...]
    h: Expr
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise SystemDefinitionError("need at least one state and one input")
        if len(self.f) != n:
            raise SystemDefinitionError(f"f has {len(self.f)} entries, expected {n}")
        if len(self.g) != n or any(len(r) != m for r in self.g):
            raise SystemDefinitionError(f"g must be {n} x {m}")
        every = list(self.f) + [e for r in self.g for e in r] + [self.h]
        for e in every:
            if uses_inputs(e):
                raise SystemDefinitionError("f, g and h must not depend on the input")
            if max_state_index(e) >= n:
                raise SystemDefinitionError("expression references an undeclared state")

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.input_names)

    def text(self, e: Expr) -> str:
        return to_text(e, self.state_names, self.input_names)

    def to_text(self) -> str:
        f = ", ".join(self.text(e) for e in self.f)
        g = ", ".join("[" + ", ".join(self.text(e) for e in r) + "]" for r in self.g)
        return (
            f"system {self.name}\n"
            f"states {' '.join(self.state_names)}\n"
            f"inputs {' '.join(self.input_names)}\n"
            f"f = [{f}]\n"
            f"g = [{g}]\n"
            f"h = {self.text(self.h)}\n"
        )

    @cached_property
    def digest(self) -> str:
        """Stable hash of the normalised system text."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    # compiled numerics ------------------------------------------------

    @cached_property
    def _vf_scalar(self):
        exprs = list(self.f) + [e for r in self.g for e in r]
        return compile_scalar(exprs)

    @cached_property
    def _vf_vector(self):
        exprs = list(self.f) + [e for r in self.g for e in r]
        return compile_vector(exprs)

    def vector_field(self, x, u) -> np.ndarray:
        """f(x) + g(x) u at a single point."""
        vals = self._vf_scalar(x)
        n, m = self.n, self.m
        out = np.array(vals[:n], dtype=float)
        if m:
            gm = np.asarray(vals[n:], dtype=float).reshape(n, m)
            out += gm @ np.asarray(u, dtype=float).reshape(m)
        return out

    def vector_field_batch(self, X, U) -> np.ndarray:
        vals = self._vf_vector(X)
        n, m = self.n, self.m
        fx = vals[..., :n]
        gx = vals[..., n:].reshape(vals.shape[:-1] + (n, m))
        U = np.broadcast_to(np.asarray(U, dtype=float), vals.shape[:-1] + (m,))
        return fx + np.einsum("...ij,...j->...i", gx, U)

    @cached_property
    def _lin_scalar(self):
        # d f / dx and d g_k / dx flattened: n*n + m*n*n entries
        n, m = self.n, self.m
        exprs = [differentiate(self.f[i], j) for i in range(n) for j in range(n)]
        for k in range(m):
            exprs += [differentiate(self.g[i][k], j) for i in range(n) for j in range(n)]
        return compile_scalar(exprs)

    def linearization(self, x, u) -> np.ndarray:
        """Jacobian of f(x) + g(x) u with respect to x, u held fixed."""
        n, m = self.n, self.m
        vals = np.asarray(self._lin_scalar(x), dtype=float)
        A = vals[: n * n].reshape(n, n).copy()
        u = np.asarray(u, dtype=float).reshape(m)
        for k in range(m):
            blk = vals[n * n * (k + 1) : n * n * (k + 2)].reshape(n, n)
            A += u[k] * blk
        return A

    def output(self, x) -> float:
        return self._h_scalar(x)[0]

    @cached_property
    def _h_scalar(self):
        return compile_scalar([self.h])
