"""Sampled modulus of continuity of Phi with respect to gamma."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _kernels
from ..exprdsl import ControlAffineSystem, Expr, compile_vector, parse_expression
from .box import SampleBox


@dataclass
class ModulusEstimate:
    s: np.ndarray
    rho: np.ndarray
    exponent: float
    coefficient: float
    fit_range: tuple[float, float]
    points: int

    def csv_rows(self):
        for s, r in zip(self.s, self.rho):
            yield [float(s), float(r)]

    def summary(self) -> dict:
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "fit_range": list(self.fit_range),
            "points": self.points,
            "rho_max": float(self.rho[-1]) if len(self.rho) else None,
        }


def _as_exprs(sys: ControlAffineSystem, items) -> list[Expr]:
    if isinstance(items, (str, Expr)):
        items = [items]
    out = []
    for e in items:
        out.append(parse_expression(e, sys.state_names, sys.input_names) if isinstance(e, str) else e)
    return out


def fit_power_law(s: np.ndarray, rho: np.ndarray, decades: float = 1.0) -> tuple[float, float, tuple[float, float]]:
    """Least squares of log rho on log s over [s_min, s_min * 10^decades]
    restricted to rho > 0.  Returns (exponent, coefficient, range)."""
    s = np.asarray(s, dtype=float)
    rho = np.asarray(rho, dtype=float)
    pos = rho > 0
    if pos.sum() < 2:
        return float("nan"), 0.0, (float("nan"), float("nan"))
    s0 = s[pos].min()
    sel = pos & (s <= s0 * 10**decades * (1 + 1e-12))
    if sel.sum() < 2:
        sel = pos
    p, c = np.polyfit(np.log(s[sel]), np.log(rho[sel]), 1)
    return float(p), float(np.exp(c)), (float(s[sel].min()), float(s[sel].max()))


def modulus_estimate(
    sys: ControlAffineSystem,
    phi: Sequence[Expr | str] | Expr | str,
    gamma: Sequence[Expr | str] | Expr | str,
    box: SampleBox,
    s_grid: Sequence[float],
    *,
    max_points: int | None = None,
    fit_decades: float = 1.0,
) -> ModulusEstimate:
    """rho(s) = max |Phi(x_a) - Phi(x_b)| over sample pairs with
    |gamma(x_a) - gamma(x_b)| <= s, and a power-law fit on the smallest
    decade of s.  Nondecreasing in s by construction."""
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or not len(s) or np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise ValueError("s-grid must be positive and strictly increasing")
    Phi = compile_vector(_as_exprs(sys, phi))
    Gam = compile_vector(_as_exprs(sys, gamma))
    X = box.points
    if max_points is not None and len(X) > max_points:
        pick = np.sort(box.rng(stream=31).choice(len(X), size=max_points, replace=False))
        X = X[pick]
    G, P = Gam(X), Phi(X)
    ok = np.all(np.isfinite(G), axis=1) & np.all(np.isfinite(P), axis=1)
    rho = _kernels.modulus_bins(G[ok], P[ok], s)
    p, c, rng = fit_power_law(s, rho, fit_decades)
    return ModulusEstimate(s, rho, p, c, rng, int(ok.sum()))
