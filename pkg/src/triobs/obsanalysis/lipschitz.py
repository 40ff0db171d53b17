"""Lipschitz ratio scans of L_g L_f^{i-1} h against H_i, and the kernel
necessary condition for a locally Lipschitz factorisation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..exprdsl import ControlAffineSystem, compile_vector, gradient
from ..liecalc import build_H, lie_table
from .box import SampleBox
from .rank import RANK_TOL

BLOWUP_THRESHOLD = 1.5


@dataclass
class CellEstimate:
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    radii: tuple[float, ...]
    estimates: tuple[float, ...]  # local sup of the ratio at each radius
    flagged: bool

    @property
    def local(self) -> float:
        return max(self.estimates) if self.estimates else float("nan")

    def growth(self) -> list[float]:
        e = self.estimates
        return [b / a if a > 0 else (np.inf if b > 0 else 1.0) for a, b in zip(e, e[1:])]


@dataclass
class LipschitzScan:
    order: int
    r0: float
    estimate: float  # running max over every evaluated pair
    estimate_r0: float  # restricted to pairs separated by at least r0
    worst_pair: tuple[np.ndarray, np.ndarray] | None
    cells: list[CellEstimate]
    blowup_threshold: float
    pairs_evaluated: int
    notes: list[str] = field(default_factory=list)

    @property
    def flagged_cells(self) -> list[CellEstimate]:
        return [c for c in self.cells if c.flagged]

    @property
    def bounded(self) -> bool:
        return not self.flagged_cells and bool(np.isfinite(self.estimate))

    def csv_rows(self):
        for c in self.cells:
            yield [*c.center.tolist(), c.local, int(c.flagged)]

    def summary(self) -> dict:
        return {
            "order": self.order,
            "r0": self.r0,
            "estimate": self.estimate,
            "estimate_r0": self.estimate_r0,
            "bounded": self.bounded,
            "blowup_threshold": self.blowup_threshold,
            "flagged_cells": [c.center.tolist() for c in self.flagged_cells],
            "pairs_evaluated": self.pairs_evaluated,
            "worst_pair": None if self.worst_pair is None else [p.tolist() for p in self.worst_pair],
            "notes": self.notes,
        }


def _ratios(Hf, af, XA, XB):
    dH = np.linalg.norm(Hf(XA) - Hf(XB), axis=-1)
    da = np.linalg.norm(af(XA) - af(XB), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dH > 0, da / np.where(dH > 0, dH, 1.0), np.where(da > 0, np.inf, 0.0))
    r[~np.isfinite(dH) | ~np.isfinite(da)] = np.nan
    return r


def _unit_dirs(n: int, extra: int, rng) -> np.ndarray:
    eye = np.eye(n)
    D = [eye, -eye]
    if extra:
        R = rng.normal(size=(extra, n))
        D.append(R / np.linalg.norm(R, axis=1, keepdims=True))
    return np.concatenate(D)


def lipschitz_ratio_scan(
    sys: ControlAffineSystem,
    i: int,
    box: SampleBox,
    r0: float = 0.05,
    *,
    cells: tuple[int, ...] | int = 5,
    anchors_per_cell: int = 2,
    random_dirs: int = 4,
    halvings: int = 2,
    pair_samples: int = 2000,
    blowup_threshold: float = BLOWUP_THRESHOLD,
    margin: float = 0.0,
) -> LipschitzScan:
    """Sup of |dL_gL_f^{i-1}h| / |dH_i| over sampled pairs.

    The global estimate combines (a) all pairs among up to ``pair_samples``
    box samples separated by at least r0 and (b) per-cell probe pairs at
    radii r0, r0/2, ..., r0/2^halvings around the cell centre and a few
    random anchors.  Probe pairs stay inside the box inflated by
    ``margin``.  A cell is flagged when every halving multiplies its
    local estimate by more than ``blowup_threshold``.
    """
    if r0 <= 0:
        raise ValueError("exclusion radius r0 must be positive")
    if i < 1:
        raise ValueError("order must be >= 1")
    H = build_H(sys, i)
    a = compile_vector(lie_table(sys).lgf(i - 1))
    n = sys.n
    cells = (cells,) * n if isinstance(cells, int) else tuple(cells)
    if len(cells) != n or any(c < 1 for c in cells):
        raise ValueError("cells must give a positive count per axis")
    rng = box.rng(stream=23)
    lo_s, hi_s = box.inflated_bounds(margin)

    # (a) sampled pairs, nested prefix of a fixed permutation
    X = box.points
    perm = box.rng(stream=29).permutation(len(X))[: max(pair_samples, 0)]
    P = X[np.sort(perm)]
    Z, V = H(P), a(P)
    ok = np.all(np.isfinite(Z), axis=1) & np.all(np.isfinite(V), axis=1)
    P, Z, V = P[ok], Z[ok], V[ok]
    best, worst_pair, pairs = 0.0, None, 0
    if len(P) >= 2:
        best, bi, bj = _kernels.pair_ratio_max(P, Z, V, r0)
        pairs += len(P) * (len(P) - 1) // 2
        if bi >= 0:
            worst_pair = (P[bi].copy(), P[bj].copy())
    best_r0 = best

    # (b) shrinking probes per cell
    edges = [np.linspace(box.lower[k], box.upper[k], cells[k] + 1) for k in range(n)]
    dirs = _unit_dirs(n, random_dirs, rng)
    radii = tuple(r0 / 2**h for h in range(halvings + 1))
    out: list[CellEstimate] = []
    for idx in np.ndindex(*cells):
        clo = np.array([edges[k][idx[k]] for k in range(n)])
        chi = np.array([edges[k][idx[k] + 1] for k in range(n)])
        centre = (clo + chi) / 2
        centre[np.abs(centre) < 1e-12 * box.width] = 0.0
        A = np.concatenate([centre[None], clo + rng.random((anchors_per_cell, n)) * (chi - clo)])
        A = A[box.contains(A, margin)]
        est = []
        for r in radii:
            XA = np.repeat(A, len(dirs), axis=0)
            XB = XA + r * np.tile(dirs, (len(A), 1))
            keep = np.all((XB >= lo_s) & (XB <= hi_s), axis=1) & box.contains(XB, margin)
            XA, XB = XA[keep], XB[keep]
            if not len(XA):
                est.append(0.0)
                continue
            rr = _ratios(H, a, XA, XB)
            pairs += len(rr)
            rr = np.where(np.isnan(rr), 0.0, rr)
            k = int(np.argmax(rr))
            est.append(float(rr[k]))
            if rr[k] > best:
                best, worst_pair = float(rr[k]), (XA[k].copy(), XB[k].copy())
            if r >= r0 * (1 - 1e-12) and rr[k] > best_r0:
                best_r0 = float(rr[k])
        cell = CellEstimate(centre, clo, chi, radii, tuple(est), False)
        g = cell.growth()
        cell.flagged = bool(g) and all(v > blowup_threshold for v in g) and cell.local > 0
        out.append(cell)

    notes = []
    if any(c.flagged for c in out):
        notes.append("ratio grows as pairs shrink: no locally Lipschitz factorisation near flagged cells")
    return LipschitzScan(i, r0, best, best_r0, worst_pair, out, blowup_threshold, pairs, notes)


@dataclass
class KernelCheck:
    point: np.ndarray
    kernel: np.ndarray  # (d, n) orthonormal rows
    magnitude: float
    violated: bool

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "kernel": self.kernel.tolist(),
            "magnitude": self.magnitude,
            "violated": self.violated,
        }


def kernel_condition_check(
    sys: ControlAffineSystem,
    i: int,
    box: SampleBox | None = None,
    *,
    points: np.ndarray | None = None,
    rank_tol: float = RANK_TOL,
    tol: float = 1e-9,
) -> list[KernelCheck]:
    """At samples where dH_i/dx has rank < n, test whether the gradient of
    each L_{g_k} L_f^{i-1} h annihilates ker dH_i/dx.

    A nonzero projection rules out a locally Lipschitz g_i near the point;
    a zero projection is inconclusive (the condition is only necessary).
    """
    if points is None:
        if box is None:
            raise ValueError("need a box or explicit points")
        points = box.points
    X = np.atleast_2d(np.asarray(points, dtype=float))
    H = build_H(sys, i)
    row = lie_table(sys).lgf(i - 1)
    grad = compile_vector([g for e in row for g in gradient(e, sys.n)])
    J = H.jac(X)
    G = grad(X).reshape(len(X), sys.m, sys.n)
    n = sys.n
    out = []
    for x, Jx, Gx in zip(X, J, G):
        if not (np.all(np.isfinite(Jx)) and np.all(np.isfinite(Gx))):
            continue
        _, s, Vt = np.linalg.svd(Jx, full_matrices=True)
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s >= rank_tol * smax)) if smax > 0 else 0
        if rank >= n:
            continue
        K = Vt[rank:]
        mag = float(np.max(np.abs(Gx @ K.T))) if K.size else 0.0
        scale = 1.0 + float(np.max(np.abs(Gx)))
        out.append(KernelCheck(x.copy(), K, mag, mag > tol * scale))
    return out
