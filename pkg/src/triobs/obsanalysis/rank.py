from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exprdsl import ControlAffineSystem
from ..liecalc import ObservabilityMap, build_H
from .box import SampleBox

RANK_TOL = 1e-8


def numeric_rank(J: np.ndarray, rank_tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Ranks and singular values of a stack of matrices (..., r, c).

    A singular value counts when sigma_k >= rank_tol * sigma_max.
    """
    s = np.linalg.svd(J, compute_uv=False)
    smax = s[..., :1]
    rank = np.sum(s >= rank_tol * smax, axis=-1)
    rank = np.where(smax[..., 0] > 0, rank, 0)
    return rank, s


@dataclass
class RankReport:
    order: int
    n: int
    points: np.ndarray
    rank: np.ndarray  # -1 where the Jacobian is undefined
    sigma_min: np.ndarray
    sigma_ratio: np.ndarray
    rank_tol: float
    margin: float = 0.0
    singular_set: list[str] = field(default_factory=list)

    @property
    def full_rank(self) -> int:
        return min(self.order, self.n)

    @property
    def defined(self) -> np.ndarray:
        return self.rank >= 0

    @property
    def deficient(self) -> np.ndarray:
        return self.defined & (self.rank < self.full_rank)

    @property
    def near_singular_points(self) -> np.ndarray:
        return self.points[self.deficient]

    @property
    def is_immersion(self) -> bool:
        """Rank n at every defined sample."""
        ok = self.rank[self.defined]
        return bool(ok.size) and bool(np.all(ok == self.n))

    @property
    def min_sigma(self) -> float:
        v = self.sigma_min[self.defined]
        return float(v.min()) if v.size else float("nan")

    def regular_points(self, eps: float | None = None) -> np.ndarray:
        """Sampled part of K_{i,eps}: full-rank points at distance >= eps
        from every sampled rank-deficient point."""
        eps = self.margin if eps is None else eps
        good = self.defined & ~self.deficient
        P = self.points[good]
        bad = self.near_singular_points
        if eps <= 0 or bad.size == 0:
            return P
        from scipy.spatial import cKDTree

        d, _ = cKDTree(bad).query(P)
        return P[d >= eps]

    def csv_rows(self):
        for p, r, s in zip(self.points, self.rank, self.sigma_min):
            yield [*p.tolist(), self.order, int(r), float(s)]

    def summary(self) -> dict:
        return {
            "order": self.order,
            "samples": int(len(self.points)),
            "undefined": int((~self.defined).sum()),
            "rank_deficient": int(self.deficient.sum()),
            "min_sigma": self.min_sigma,
            "immersion": self.is_immersion,
            "singular_set": self.singular_set,
            "rank_tol": self.rank_tol,
        }


def _describe_singular_set(points, deficient, defined, names) -> list[str]:
    """Greedy cover of the deficient samples by coordinate hyperplanes
    x_k = c on which every defined sample is deficient."""
    bad = points[deficient]
    if bad.size == 0:
        return []
    planes = []
    for k in range(points.shape[1]):
        for c in np.unique(bad[:, k]):
            on = defined & (points[:, k] == c)
            if on.sum() > 1 and np.all(deficient[on]):
                planes.append((k, float(c), on))
    covered = np.zeros(len(points), dtype=bool)
    out = []
    for k, c, on in sorted(planes, key=lambda p: -p[2].sum()):
        if np.any(on & deficient & ~covered):
            covered |= on
            out.append(f"{names[k]} = {c:g}")
    rest = deficient & ~covered
    if rest.any():
        out.append(f"{int(rest.sum())} isolated points")
    return out


def rank_profile(
    sys: ControlAffineSystem,
    i: int,
    box: SampleBox,
    rank_tol: float = RANK_TOL,
    margin: float = 0.0,
) -> RankReport:
    """SVD rank of dH_i/dx at every sample of ``box``."""
    if i < 1:
        raise ValueError("order must be >= 1")
    H = build_H(sys, i)
    return _profile(H, box.points, rank_tol, margin, sys.state_names)


def _profile(H: ObservabilityMap, X: np.ndarray, rank_tol, margin, names) -> RankReport:
    J = H.jac(X)
    defined = np.all(np.isfinite(J), axis=(1, 2))
    Jd = np.where(defined[:, None, None], J, 0.0)
    rank, s = numeric_rank(Jd, rank_tol)
    rank = np.where(defined, rank, -1)
    smin = np.where(defined, s[:, -1], np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s[:, 0] > 0, s[:, -1] / s[:, 0], 0.0)
    ratio = np.where(defined, ratio, np.nan)
    full = min(H.order, H.n)
    deficient = defined & (rank < full)
    desc = _describe_singular_set(X, deficient, defined, names)
    return RankReport(
        order=H.order,
        n=H.n,
        points=X,
        rank=rank,
        sigma_min=smin,
        sigma_ratio=ratio,
        rank_tol=rank_tol,
        margin=margin,
        singular_set=desc,
    )


@dataclass
class OrderSearchResult:
    strong_order: int | None
    weak_order: int | None
    evidence: list[dict]

    def to_dict(self) -> dict:
        return {"strong_order": self.strong_order, "weak_order": self.weak_order, "evidence": self.evidence}


def strong_order_search(
    sys: ControlAffineSystem,
    max_order: int,
    box: SampleBox,
    *,
    rank_tol: float = RANK_TOL,
    delta: float = 0.05,
    fiber_tol: float = 1e-9,
    check_injectivity: bool = True,
) -> OrderSearchResult:
    """Smallest order whose H_i is a sampled immersion (and injective).

    ``weak_order`` is the smallest order for which the injectivity scan
    finds no collision; ``strong_order`` additionally needs rank n at every
    sample.
    """
    from .fibers import injectivity_scan

    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    strong = weak = None
    evidence = []
    for i in range(1, max_order + 1):
        rep = rank_profile(sys, i, box, rank_tol)
        row = {"order": i, "immersion": rep.is_immersion, "min_sigma": rep.min_sigma,
               "rank_deficient": int(rep.deficient.sum()), "singular_set": rep.singular_set}
        injective = None
        if weak is not None:
            # H_i extends H_weak, so injectivity carries over
            injective = True
        elif check_injectivity:
            coll = injectivity_scan(build_H(sys, i), box, delta, fiber_tol=fiber_tol)
            injective = len(coll) == 0
            row["collisions"] = len(coll)
        row["injective"] = injective
        evidence.append(row)
        if weak is None and injective:
            weak = i
        if strong is None and rep.is_immersion and (injective or not check_injectivity):
            strong = i
        if strong is not None and (weak is not None or not check_injectivity):
            break
    return OrderSearchResult(strong, weak, evidence)
