"""Batched Levenberg-Marquardt for small nonlinear least-squares problems.

Solves  min_x |F(x) - target|^2  from many starting points at once.  Each
start carries its own damping parameter; all linear algebra is batched
through numpy.  Iteration does not stop at a residual tolerance: it runs
until the step stalls, so minimisers in flat directions (x^3 near 0) are
driven all the way in rather than left sitting at the tolerance boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray  # (S, n)
    residual: np.ndarray  # (S,) Euclidean norm of F(x) - target
    iterations: int


def levenberg_marquardt(
    fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0: np.ndarray,
    target: np.ndarray,
    *,
    max_iter: int = 200,
    xtol: float = 1e-15,
    lam0: float = 1e-3,
) -> LMResult:
    """``fun(X) -> (F (S, k), J (S, k, n))``; ``target`` broadcasts to (S, k)."""
    X = np.array(x0, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[None, :]
    S, n = X.shape
    F, J = fun(X)
    target = np.broadcast_to(np.asarray(target, dtype=float), F.shape)
    R = F - target
    cost = _cost(R)
    lam = np.full(S, lam0)
    active = np.isfinite(cost)
    eye = np.eye(n)
    it = 0
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        a = np.flatnonzero(active)
        Ja, Ra = J[a], R[a]
        JtJ = np.einsum("ski,skj->sij", Ja, Ja)
        g = np.einsum("ski,sk->si", Ja, Ra)
        d = np.einsum("sii->si", JtJ)
        mu = 1e-12 * (1.0 + d.max(axis=1))
        A = JtJ + lam[a, None, None] * (d[:, :, None] * eye + mu[:, None, None] * eye)
        try:
            step = -np.linalg.solve(A, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.einsum("sij,sj->si", np.linalg.pinv(A), g)
        Xn = X[a] + step
        Fn, Jn = fun(Xn)
        Rn = Fn - target[a]
        cn = _cost(Rn)
        better = np.isfinite(cn) & (cn <= cost[a])
        acc = a[better]
        X[acc], F[acc], J[acc], R[acc], cost[acc] = Xn[better], Fn[better], Jn[better], Rn[better], cn[better]
        lam[acc] = np.maximum(lam[acc] / 3.0, 1e-15)
        rej = a[~better]
        lam[rej] = lam[rej] * 4.0
        small = np.linalg.norm(step, axis=1) <= xtol * (np.linalg.norm(X[a], axis=1) + xtol)
        done = a[(better & small) | (cost[a] == 0.0) | (lam[a] > 1e16)]
        active[done] = False
    return LMResult(x=X, residual=np.sqrt(cost), iterations=it)


def _cost(R: np.ndarray) -> np.ndarray:
    c = np.einsum("sk,sk->s", R, R)
    c[~np.isfinite(c)] = np.inf
    return c


def gauss_newton_point(
    value_and_jac: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0: np.ndarray,
    target: np.ndarray,
    *,
    max_iter: int = 12,
    tol: float = 1e-12,
    backtrack: int = 10,
) -> tuple[np.ndarray, float]:
    """Gauss-Newton with step halving from a warm start at a single point.

    Returns the final iterate and its residual norm; the caller decides
    whether that counts as success.  Iteration ends when no halving of
    the step lowers the residual.
    """
    from .exprdsl import DomainError

    x = np.array(x0, dtype=float)
    try:
        F, J = value_and_jac(x)
    except DomainError:
        return x, np.inf
    r = F - target
    res = float(np.sqrt(r @ r))
    for _ in range(max_iter):
        if res <= tol:
            break
        step = None
        if J.shape[0] == J.shape[1]:
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                pass
        if step is None or not np.all(np.isfinite(step)):
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        accepted = False
        for _ in range(backtrack + 1):
            xn = x + step
            try:
                Fn, Jn = value_and_jac(xn)
            except DomainError:
                step = step / 2
                continue
            rn = Fn - target
            resn = float(np.sqrt(rn @ rn))
            if np.isfinite(resn) and resn < res:
                accepted = True
                break
            step = step / 2
        if not accepted:
            break
        x, F, J, r, res = xn, Fn, Jn, rn, resn
    return x, res
