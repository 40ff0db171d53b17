"""Numerical left inversion of an observability map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AmbiguousInverse, NoConvergence
from ..liecalc import ObservabilityMap
from ..lm import gauss_newton_point, levenberg_marquardt
from ..obsanalysis.box import SampleBox

INV_TOL = 1e-9
DELTA_MIN = 1e-3


@dataclass
class InverseResult:
    x: np.ndarray
    residual: float
    condition: float
    success: bool
    starts: int
    alternatives: np.ndarray | None = None  # other accepted minimisers

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "residual": self.residual,
            "condition": self.condition,
            "success": self.success,
            "starts": self.starts,
        }


def jacobian_condition(H: ObservabilityMap, x) -> float:
    J = H.jac(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(J)):
        return float("inf")
    s = np.linalg.svd(J, compute_uv=False)
    if len(s) < H.n or s[-1] == 0:
        return float("inf")
    return float(s[0] / s[-1])


def left_inverse(
    H: ObservabilityMap,
    z,
    guesses=None,
    *,
    box: SampleBox | None = None,
    starts: int = 16,
    inv_tol: float = INV_TOL,
    delta_min: float = DELTA_MIN,
    margin: float = 0.05,
    seed_stream: int = 41,
) -> InverseResult:
    """Minimise |H(x) - z| by multistart LM.

    Starts are the given guesses plus ``starts`` uniform points of the box
    inflated by ``margin``.  Raises :class:`NoConvergence` when no start
    reaches ``inv_tol`` and :class:`AmbiguousInverse` when two accepted
    minimisers are more than ``delta_min`` apart.
    """
    z = np.asarray(z, dtype=float).reshape(H.order)
    S = []
    if guesses is not None:
        S.append(np.atleast_2d(np.asarray(guesses, dtype=float)))
    if box is not None and starts > 0:
        S.append(box.uniform(starts, stream=seed_stream, margin=margin))
    if not S:
        raise ValueError("left_inverse needs guesses or a box")
    X0 = np.concatenate(S)
    res = levenberg_marquardt(lambda X: (H(X), H.jac(X)), X0, z[None, :], max_iter=300)
    r = res.residual
    order = np.argsort(r, kind="stable")
    best = order[0]
    x = res.x[best]
    out = InverseResult(x, float(r[best]), jacobian_condition(H, x), bool(r[best] <= inv_tol), len(X0))
    if not out.success:
        raise NoConvergence(f"left inversion residual {r[best]:.3g} exceeds {inv_tol:g}", out)
    ok = np.flatnonzero(r <= inv_tol)
    if box is not None:
        ok = ok[box.contains(res.x[ok], margin)]
    sep = np.linalg.norm(res.x[ok] - x, axis=1)
    far = ok[sep > delta_min]
    if far.size:
        out.alternatives = res.x[far]
        out.success = False
        raise AmbiguousInverse(
            f"{far.size} minimisers further than {delta_min:g} from the best one; H is not injective here", out
        )
    return out


def warm_inverse(H: ObservabilityMap, z, hint, *, inv_tol: float = INV_TOL, max_iter: int = 20):
    """Gauss-Newton from a warm start; returns (x, residual) without
    multistart or ambiguity checks."""
    return gauss_newton_point(H.value_and_jac, np.asarray(hint, dtype=float), np.asarray(z, dtype=float),
                              max_iter=max_iter, tol=inv_tol * 1e-3)
