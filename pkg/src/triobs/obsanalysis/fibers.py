"""Fiber pairs of H_i: collisions, multistart search and fiber consistency checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..exprdsl import ControlAffineSystem, compile_vector, gradient
from ..liecalc import ObservabilityMap, build_H, lie_table
from ..lm import levenberg_marquardt
from .box import SampleBox
from .rank import numeric_rank

FIBER_TOL = 1e-9
DELTA_MIN = 1e-3
MERGE_TOL = 1e-6


@dataclass
class FiberPair:
    xa: np.ndarray
    xb: np.ndarray
    order: int
    dH: float
    sep: float
    dLg: float = float("nan")

    def csv_row(self) -> list:
        return [*self.xa.tolist(), *self.xb.tolist(), self.order, self.dH, self.sep, self.dLg]

    def to_dict(self) -> dict:
        return {
            "xa": self.xa.tolist(),
            "xb": self.xb.tolist(),
            "order": self.order,
            "dH": self.dH,
            "sep": self.sep,
            "dLg": None if np.isnan(self.dLg) else self.dLg,
        }


def _lm_fun(H: ObservabilityMap):
    def fun(X):
        return H(X), H.jac(X)

    return fun


def refine_to_fiber(H: ObservabilityMap, anchors: np.ndarray, starts: np.ndarray, max_iter: int = 300):
    """Minimise |H(x) - H(anchor)| from each start; one start per anchor row."""
    target = H(anchors)
    res = levenberg_marquardt(_lm_fun(H), starts, target, max_iter=max_iter)
    return res.x, res.residual


def _pairs_from(H, xa, xb, resid, fiber_tol, delta_min, inside) -> list[FiberPair]:
    out = []
    for a, b, r, ok in zip(xa, xb, resid, inside):
        if not ok or not np.isfinite(r):
            continue
        ya, yb = H(a), H(b)
        dH = float(np.linalg.norm(ya - yb))
        sep = float(np.linalg.norm(a - b))
        if dH <= fiber_tol and sep >= delta_min:
            out.append(FiberPair(a.copy(), b.copy(), H.order, dH, sep))
    return out


def _dedupe(pairs: list[FiberPair], tol: float = MERGE_TOL) -> list[FiberPair]:
    """Drop pairs matching an earlier one (either orientation) within tol."""
    if not pairs:
        return []
    A = np.array([p.xa for p in pairs])
    B = np.array([p.xb for p in pairs])
    kept: list[int] = []
    for k in range(len(pairs)):
        if kept:
            Ka, Kb = A[kept], B[kept]
            same = (np.abs(Ka - A[k]).max(axis=1) <= tol) & (np.abs(Kb - B[k]).max(axis=1) <= tol)
            swap = (np.abs(Ka - B[k]).max(axis=1) <= tol) & (np.abs(Kb - A[k]).max(axis=1) <= tol)
            if np.any(same | swap):
                continue
        kept.append(k)
    return [pairs[k] for k in kept]


def exact_collisions(
    H: ObservabilityMap, X: np.ndarray, delta: float, fiber_tol: float = FIBER_TOL, limit: int = 50
) -> list[FiberPair]:
    """Sample pairs whose H values coincide to within the quantisation
    ``fiber_tol`` (bucketed, so grid symmetries are caught in linear time)."""
    Y = H(X)
    ok = np.all(np.isfinite(Y), axis=1)
    X, Y = X[ok], Y[ok]
    if len(X) < 2:
        return []
    keys = np.round(Y / fiber_tol).astype(np.int64) if fiber_tol > 0 else Y
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    out: list[FiberPair] = []
    for g in np.flatnonzero(counts > 1):
        members = np.flatnonzero(inv == g)
        a = members[0]
        seps = np.linalg.norm(X[members] - X[a], axis=1)
        b = members[int(np.argmax(seps))]
        if seps.max() >= delta:
            dH = float(np.linalg.norm(Y[a] - Y[b]))
            if dH <= fiber_tol:
                out.append(FiberPair(X[a].copy(), X[b].copy(), H.order, dH, float(seps.max())))
        if len(out) >= limit:
            break
    return out


def injectivity_scan(
    H: ObservabilityMap,
    box: SampleBox,
    delta: float,
    *,
    fiber_tol: float = FIBER_TOL,
    neighbours: int = 6,
    candidates: int = 64,
    margin: float = 0.05,
    limit: int = 50,
) -> list[FiberPair]:
    """Sampled collisions of H with separation >= delta.

    Exact coincidences come from bucketing; near-coincidences (pairs close
    in H but far apart in x) are refined by Gauss-Newton/LM from the second
    point toward the first point's fiber.  An empty list is evidence of
    injectivity on the samples, not a proof.
    """
    if delta <= 0:
        raise ValueError("separation delta must be positive")
    X = box.points
    found = exact_collisions(H, X, delta, fiber_tol, limit)
    if len(found) >= limit:
        return found
    Y = H(X)
    ok = np.all(np.isfinite(Y), axis=1)
    Xo, Yo = X[ok], Y[ok]
    if len(Xo) > neighbours:
        scale = np.maximum(Yo.max(axis=0) - Yo.min(axis=0), 1e-12)
        tree = cKDTree(Yo / scale)
        d, idx = tree.query(Yo / scale, k=neighbours + 1)
        ia = np.repeat(np.arange(len(Xo)), neighbours)
        ib = idx[:, 1:].ravel()
        dy = np.linalg.norm(Yo[ia] - Yo[ib], axis=1)
        dx = np.linalg.norm(Xo[ia] - Xo[ib], axis=1)
        far = dx >= delta
        ia, ib, ratio = ia[far], ib[far], dy[far] / dx[far]
        order = np.lexsort((ib, ia, ratio))[:candidates]
        if order.size:
            xa, xb0 = Xo[ia[order]], Xo[ib[order]]
            xb, resid = refine_to_fiber(H, xa, xb0)
            inside = box.contains(xb, margin)
            found += _pairs_from(H, xa, xb, resid, fiber_tol, delta, inside)
    return _dedupe(found)[:limit]


def fiber_pair_search(
    H: ObservabilityMap,
    box: SampleBox,
    count: int,
    *,
    starts: int = 16,
    fiber_tol: float = FIBER_TOL,
    delta_min: float = DELTA_MIN,
    margin: float = 0.05,
) -> list[FiberPair]:
    """Multistart LM: for ``count`` anchors drawn from the box samples, look
    for distinct points of the same H fiber inside the inflated box.

    Half of the anchors come from samples where dH/dx loses rank (where
    nontrivial fibers concentrate), the rest uniformly from all samples.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    X = box.points
    rng = box.rng(stream=11)
    J = H.jac(X)
    ok = np.all(np.isfinite(J), axis=(1, 2))
    rank, _ = numeric_rank(np.where(ok[:, None, None], J, 0.0))
    weak = np.flatnonzero(ok & (rank < min(H.order, H.n)))
    n_weak = min(len(weak), count // 2 if len(weak) < len(X) else count)
    pick_w = rng.choice(weak, size=n_weak, replace=False) if n_weak else np.empty(0, dtype=int)
    rest = np.setdiff1d(np.arange(len(X)), pick_w)
    pick_r = rng.choice(rest, size=min(count - n_weak, len(rest)), replace=False)
    pick = np.sort(np.concatenate([pick_w, pick_r]))
    anchors = X[pick]
    lo, hi = box.inflated_bounds(margin)
    S = rng.random((len(anchors), starts, box.dim)) * (hi - lo) + lo
    xa = np.repeat(anchors, starts, axis=0)
    xb, resid = refine_to_fiber(H, xa, S.reshape(-1, box.dim))
    inside = box.contains(xb, margin)
    return _dedupe(_pairs_from(H, xa, xb, resid, fiber_tol, delta_min, inside))


@dataclass
class PropertyAReport:
    order: int
    pairs: list[FiberPair]
    max_discrepancy: float
    passed: bool
    a_tol: float
    witness: FiberPair | None = None
    b_surrogate: list[float] = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return not self.pairs

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "pairs": len(self.pairs),
            "max_discrepancy": self.max_discrepancy,
            "a_tol": self.a_tol,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "b_surrogate_max_distance": max(self.b_surrogate) if self.b_surrogate else None,
        }


def property_a_check(
    sys: ControlAffineSystem,
    i: int,
    box: SampleBox,
    *,
    a_tol: float = 1e-6,
    anchors: int = 64,
    starts: int = 16,
    fiber_tol: float = FIBER_TOL,
    delta_min: float = DELTA_MIN,
    margin: float = 0.05,
    rank_tol: float = 1e-8,
) -> PropertyAReport:
    """Compare L_g L_f^{i-1} h across the sampled fibers of H_i.

    A pair fails when the value gap exceeds ``a_tol`` plus the drift the
    residual fiber mismatch could explain (dH times the larger gradient
    norm of the value at the two ends).
    """
    H = build_H(sys, i)
    row = lie_table(sys).lgf(i - 1)
    value = compile_vector(row)
    grad = compile_vector([g for e in row for g in gradient(e, sys.n)])

    pairs = exact_collisions(H, box.points, delta_min, fiber_tol)
    pairs += fiber_pair_search(
        H, box, anchors, starts=starts, fiber_tol=fiber_tol, delta_min=delta_min, margin=margin
    )
    pairs = _dedupe(pairs)

    worst, witness, ok = 0.0, None, True
    for p in pairs:
        va, vb = value(p.xa), value(p.xb)
        gap = float(np.max(np.abs(va - vb)))
        p.dLg = gap
        gn = max(np.linalg.norm(grad(p.xa)), np.linalg.norm(grad(p.xb)))
        allowed = a_tol + p.dH * (gn if np.isfinite(gn) else 0.0)
        if gap > worst:
            worst, witness = gap, p
        if not gap <= allowed:
            ok = False
    b_dist = _b_surrogate(sys, i, box, pairs, rank_tol)
    return PropertyAReport(i, pairs, worst, ok, a_tol, witness if not ok or pairs else None, b_dist)


def _b_surrogate(sys, i, box, pairs, rank_tol) -> list[float]:
    """Distance from each pair end to the nearest sampled point where
    dH_{i-1}/dx has full rank (evidence for Property B(i))."""
    if not pairs or i < 2:
        return []
    from .rank import rank_profile

    rep = rank_profile(sys, i - 1, box, rank_tol)
    good = rep.points[rep.defined & ~rep.deficient]
    if not len(good):
        return [float("inf")] * len(pairs)
    tree = cKDTree(good)
    out = []
    for p in pairs:
        da, _ = tree.query(p.xa)
        db, _ = tree.query(p.xb)
        out.append(float(max(da, db)))
    return out
