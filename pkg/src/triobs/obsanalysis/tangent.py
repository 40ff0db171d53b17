"""Tangent (linearised) system along trajectories and its output rank test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IntegrationBlowup, TrajectoryLeftBox
from ..exprdsl import ControlAffineSystem, add, compile_vector, const, gradient, mul
from ..liecalc import lie_f
from ..signals import ConstantInput, InputSignal, rk4_step, signal_from_config, time_grid
from .box import SampleBox
from .rank import RANK_TOL, numeric_rank


@dataclass
class TangentState:
    x: np.ndarray
    v: np.ndarray
    w: float


@dataclass
class TangentTrace:
    t: np.ndarray
    x: np.ndarray  # (N, n)
    v: np.ndarray  # (N, n)
    w: np.ndarray  # (N,)

    @property
    def sup_w(self) -> float:
        return float(np.max(np.abs(self.w)))

    @property
    def min_v(self) -> float:
        return float(np.min(np.linalg.norm(self.v, axis=1)))

    def state(self, k: int) -> TangentState:
        return TangentState(self.x[k], self.v[k], float(self.w[k]))

    def csv_rows(self):
        for t, x, v, w in zip(self.t, self.x, self.v, self.w):
            yield [float(t), *x.tolist(), *v.tolist(), float(w)]

    def summary(self, witness_tol: float = 1e-12) -> dict:
        return {
            "sup_w": self.sup_w,
            "min_norm_v": self.min_v,
            "final_norm_v": float(np.linalg.norm(self.v[-1])),
            "witness": bool(self.sup_w < witness_tol and self.min_v > 0.0),
            "witness_tol": witness_tol,
        }


def tangent_simulate(
    sys: ControlAffineSystem,
    x0,
    v0,
    u: InputSignal | float | list,
    T: float,
    dt: float,
    *,
    box: SampleBox | None = None,
    margin: float = 0.0,
    bound: float = 1e8,
    allow_zero: bool = False,
) -> TangentTrace:
    """RK4 on x' = f + g u, v' = d(f + g u)/dx v, with w = dh/dx v.

    w stays identically zero with v bounded away from zero only if the
    output cannot tell the direction v apart along this trajectory.
    ``allow_zero`` admits v0 = 0 (used to check the linearity of the
    v-subsystem); otherwise it is rejected.
    """
    n = sys.n
    x0 = np.asarray(x0, dtype=float).reshape(n)
    v0 = np.asarray(v0, dtype=float).reshape(n)
    if not allow_zero and not np.linalg.norm(v0) > 0:
        raise ValueError("initial tangent vector v0 must be nonzero")
    sig = signal_from_config(u, sys.m)
    ts = time_grid(T, dt)
    dh = compile_vector(gradient(sys.h, n))

    def rhs(t, y):
        x, v = y[:n], y[n:]
        uu = sig(t)
        return np.concatenate([sys.vector_field(x, uu), sys.linearization(x, uu) @ v])

    Y = np.empty((len(ts), 2 * n))
    Y[0] = np.concatenate([x0, v0])
    for k in range(1, len(ts)):
        Y[k] = rk4_step(rhs, ts[k - 1], Y[k - 1], dt)
        if not np.all(np.isfinite(Y[k])) or np.max(np.abs(Y[k])) > bound:
            raise IntegrationBlowup(f"tangent integration blew up at t={ts[k]:g}", ts[k], Y[k, :n])
        if box is not None and not box.contains(Y[k, :n], margin):
            raise TrajectoryLeftBox(f"trajectory left the box at t={ts[k]:g}", ts[k], Y[k, :n])
    X, V = Y[:, :n], Y[:, n:]
    W = np.einsum("ki,ki->k", dh(X), V)
    return TangentTrace(ts, X, V, W)


def _closed_loop_rows(sys: ControlAffineSystem, u: tuple[float, ...], K: int):
    key = ("tangent_rows", u, K)
    hit = sys._cache.get(key)
    if hit is not None:
        return hit
    F = tuple(
        add(fj, *(mul(const(uk), sys.g[j][k]) for k, uk in enumerate(u))) for j, fj in enumerate(sys.f)
    )
    closed = ControlAffineSystem(sys.name, sys.state_names, sys.input_names, F, sys.g, sys.h)
    funcs = [sys.h]
    for _ in range(K - 1):
        funcs.append(lie_f(closed, funcs[-1]))
    rows = compile_vector([g for e in funcs for g in gradient(e, sys.n)])
    sys._cache[key] = rows
    return rows


@dataclass
class InfinitesimalRank:
    rank: int
    rows: np.ndarray  # (K, n)
    singular_values: np.ndarray
    witness: np.ndarray | None  # unit v annihilating every row, if rank < n

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "rows": self.rows.tolist(),
            "singular_values": self.singular_values.tolist(),
            "witness": None if self.witness is None else self.witness.tolist(),
        }


def infinitesimal_rank_check(
    sys: ControlAffineSystem, x, u, K: int, *, rank_tol: float = RANK_TOL
) -> InfinitesimalRank:
    """Rank of the rows d w^(j)/dv, j < K, at x under a constant input.

    With u frozen, w^(j) = d(L_F^j h)/dx . v where F = f + g u, which is
    the same recursion as w_{i+1} plus the input-weighted L_g terms.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if isinstance(u, ConstantInput):
        u = u.value
    u = tuple(float(v) for v in np.atleast_1d(np.asarray(u, dtype=float)))
    if len(u) != sys.m:
        raise ValueError(f"expected {sys.m} input values, got {len(u)}")
    rows = _closed_loop_rows(sys, u, K)(np.asarray(x, dtype=float)).reshape(K, sys.n)
    rank, s = numeric_rank(rows, rank_tol)
    rank = int(rank)
    witness = None
    if rank < sys.n:
        _, _, Vt = np.linalg.svd(rows, full_matrices=True)
        witness = Vt[-1]
        witness = witness * np.sign(witness[np.argmax(np.abs(witness))])
    return InfinitesimalRank(rank, rows, s, witness)
