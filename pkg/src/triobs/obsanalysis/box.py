from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Tube:
    """Points whose distance to the subspace {x_k = 0, k in axes} is below
    ``radius`` are removed from the sample set."""

    axes: tuple[int, ...]
    radius: float


@dataclass(frozen=True)
class SampleBox:
    """Axis-aligned compact set with a deterministic sampling rule.

    Samples are the tensor grid (``grid`` points per axis, endpoints
    included; a count of 1 gives the midpoint) followed by ``n_random``
    uniform points drawn from ``seed``.  Points inside an excluded tube are
    dropped.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    grid: tuple[int, ...]
    n_random: int = 0
    seed: int = 0
    exclude: tuple[Tube, ...] = field(default_factory=tuple)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        gr = tuple(int(c) for c in self.grid)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "grid", gr)
        object.__setattr__(self, "exclude", tuple(self.exclude))
        if not (len(lo) == len(hi) == len(gr)):
            raise ValueError("lower, upper and grid must have the same length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box needs lower < upper on every axis")
        if any(c < 1 for c in gr) or self.n_random < 0:
            raise ValueError("sample counts must be >= 1")

    @classmethod
    def cube(cls, lo: float, hi: float, n: int, grid: int, **kw) -> "SampleBox":
        return cls((lo,) * n, (hi,) * n, (grid,) * n, **kw)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def axis_values(self, k: int) -> np.ndarray:
        c = self.grid[k]
        if c == 1:
            return np.array([(self.lower[k] + self.upper[k]) / 2])
        return np.linspace(self.lower[k], self.upper[k], c)

    def _keep(self, X: np.ndarray) -> np.ndarray:
        keep = np.ones(len(X), dtype=bool)
        for tube in self.exclude:
            d = np.sqrt((X[:, list(tube.axes)] ** 2).sum(axis=1))
            keep &= d >= tube.radius
        return keep

    @cached_property
    def grid_points(self) -> np.ndarray:
        axes = [self.axis_values(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=1)
        return X[self._keep(X)]

    @cached_property
    def random_points(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        X = self.lo + rng.random((self.n_random, self.dim)) * self.width
        return X[self._keep(X)]

    @cached_property
    def points(self) -> np.ndarray:
        return np.concatenate([self.grid_points, self.random_points], axis=0)

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Independent seeded generator for auxiliary sampling."""
        return np.random.default_rng([self.seed, 1 + stream])

    def uniform(self, count: int, stream: int = 0, margin: float = 0.0) -> np.ndarray:
        lo, hi = self.inflated_bounds(margin)
        X = lo + self.rng(stream).random((count, self.dim)) * (hi - lo)
        return X[self._keep(X)]

    def inflated_bounds(self, margin: float) -> tuple[np.ndarray, np.ndarray]:
        pad = margin * self.width
        return self.lo - pad, self.hi + pad

    @cached_property
    def _bounds_cache(self) -> dict:
        return {}

    def _scalar_bounds(self, margin: float, tol: float):
        key = (margin, tol)
        hit = self._bounds_cache.get(key)
        if hit is None:
            lo, hi = self.inflated_bounds(margin)
            hit = self._bounds_cache[key] = (tuple((lo - tol).tolist()), tuple((hi + tol).tolist()))
        return hit

    def inflate(self, margin: float) -> "SampleBox":
        lo, hi = self.inflated_bounds(margin)
        return SampleBox(tuple(lo), tuple(hi), self.grid, self.n_random, self.seed, self.exclude)

    def contains(self, X, margin: float = 0.0, tol: float = 1e-12) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and not self.exclude:
            lo, hi = self._scalar_bounds(margin, tol)
            return all(a <= v <= b for a, v, b in zip(lo, X.tolist(), hi))
        lo, hi = self.inflated_bounds(margin)
        inside = np.all((X >= lo - tol) & (X <= hi + tol), axis=-1)
        if self.exclude:
            X2 = np.atleast_2d(X)
            inside = inside & self._keep(X2).reshape(np.shape(inside))
        return inside

    def to_dict(self) -> dict:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "grid": list(self.grid),
            "n_random": self.n_random,
            "seed": self.seed,
            "exclude": [{"axes": list(t.axes), "radius": t.radius} for t in self.exclude],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleBox":
        return cls(
            lower=tuple(d["lower"]),
            upper=tuple(d["upper"]),
            grid=tuple(d.get("grid", [5] * len(d["lower"]))),
            n_random=int(d.get("n_random", 0)),
            seed=int(d.get("seed", 0)),
            exclude=tuple(Tube(tuple(t["axes"]), float(t["radius"])) for t in d.get("exclude", [])),
        )
