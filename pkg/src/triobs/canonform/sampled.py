"""Sample-table functions with a Lipschitz (McShane) or nearest-sample
extension, optionally refined by pulling back through the key map."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .. import _kernels
from ..exprdsl import ControlAffineSystem, DomainError, Expr, compile_scalar, compile_vector
from ..liecalc import build_H, lie_table
from ..lm import gauss_newton_point
from ..obsanalysis.box import SampleBox

MCSHANE = "mcshane"
NEAREST = "nearest"
TRUST_TOL = 1e-9
# keys longer than the state live on an n-dimensional image; RK4 stages and
# observer estimates sit slightly off it, where the least-squares pullback
# is still the right state
PROJ_TOL = 1e-2


def pullback_accepted(res: float, z: np.ndarray, n: int) -> bool:
    """Whether a Gauss-Newton pullback with residual ``res`` is trusted."""
    tol = TRUST_TOL if len(z) <= n else PROJ_TOL
    return res <= tol * (1.0 + float(np.abs(z).max()))


class InconsistentSamples(ValueError):
    """Sample table violates |v_i - v_j| <= L |z_i - z_j|."""

    def __init__(self, message: str, pair: tuple[int, int], excess: float):
        super().__init__(message)
        self.pair = pair
        self.excess = excess


def source_exprs(sys: ControlAffineSystem, source: tuple[str, int]) -> tuple[Expr, ...]:
    """("lf", k) -> (L_f^k h,), ("lgf", k) -> L_g L_f^k h row."""
    kind, k = source
    table = lie_table(sys)
    if kind == "lf":
        return (table.lf(k),)
    if kind == "lgf":
        return table.lgf(k)
    raise ValueError(f"unknown value source {kind!r}")


@dataclass(eq=False)
class SampledFunction:
    """Table of (key z_k, value v_k) with an extension rule.

    ``mcshane``: f(z) = min_k (v_k + L |z - z_k|) per output component,
    L-Lipschitz everywhere and exact at the samples.  ``nearest``: value
    of the closest key.  When the table knows its origin (a system, the
    key map H_{key_order} and the value source) a query is first pulled
    back: z is left-inverted to a state x with H(x) = z and the value
    expression is evaluated there.  Outside the compact set the pulled
    back value is clamped into the McShane-Whitney envelope, so it never
    contradicts the table's Lipschitz bound.
    """

    name: str
    Z: np.ndarray
    V: np.ndarray
    mode: str
    L: float
    lipschitz_estimate: float
    lipschitz: bool
    X: np.ndarray | None = None
    source: tuple[str, int] | None = None
    key_order: int | None = None
    system: ControlAffineSystem | None = None
    box: SampleBox | None = None
    margin: float = 0.0
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.Z = np.ascontiguousarray(np.asarray(self.Z, dtype=float).reshape(len(self.Z), -1))
        self.V = np.ascontiguousarray(np.asarray(self.V, dtype=float).reshape(len(self.V), -1))
        if self.X is not None:
            self.X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        if len(self.Z) == 0 or len(self.Z) != len(self.V):
            raise ValueError("sample table must be nonempty with matching keys and values")
        if self.mode not in (MCSHANE, NEAREST):
            raise ValueError(f"unknown extension mode {self.mode!r}")

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.V.shape[1]

    @cached_property
    def is_constant(self) -> bool:
        return bool(np.all(self.V == self.V[0]))

    @property
    def refinable(self) -> bool:
        return self.system is not None and self.source is not None and self.key_order is not None

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.Z)

    @cached_property
    def _value_scalar(self):
        return compile_scalar(source_exprs(self.system, self.source))

    @cached_property
    def _value_vector(self):
        return compile_vector(source_exprs(self.system, self.source))

    @cached_property
    def key_map(self):
        return build_H(self.system, self.key_order)

    # -- pure table extension -------------------------------------------------

    def envelope(self, Q) -> tuple[np.ndarray, np.ndarray]:
        """Upper (McShane) and lower (Whitney) L-Lipschitz extensions."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return _kernels.mcshane_envelope(self.Z, self.V, self.L, Q)

    def extension(self, Q) -> np.ndarray:
        """Table-only evaluation, shape (M, p) for M query keys."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if self.mode == MCSHANE:
            return self.envelope(Q)[0]
        _, idx = self._tree.query(Q)
        return self.V[idx].copy()

    # -- refined evaluation ---------------------------------------------------

    def invert_key(self, z: np.ndarray, hint=None) -> np.ndarray | None:
        """State x in the enlarged box with H_key(x) = z, or None."""
        if hint is None:
            _, k = self._tree.query(z)
            hint = self.X[k]
        x, res = gauss_newton_point(self.key_map.value_and_jac, hint, z, max_iter=20)
        if pullback_accepted(res, z, len(x)) and self.box.contains(x, self.margin):
            return x
        return None

    def value_from_state(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Value expression at a pulled-back state x of key z."""
        try:
            v = np.array(self._value_scalar(x), dtype=float)
        except DomainError:
            return self.extension(z)[0]
        if not np.all(np.isfinite(v)):
            return self.extension(z)[0]
        if self.mode == MCSHANE and not self.box.contains(x):
            up, lo = self.envelope(z)
            v = np.minimum(np.maximum(v, lo[0]), up[0])
        return v

    def evaluate(self, z, hint=None) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(self.q)
        if self.refinable and self.is_constant:
            # a value expression that never varied on the box: keep it flat
            return self.V[0].copy()
        if self.refinable and self.X is not None:
            x = self.invert_key(z, hint)
            if x is not None:
                return self.value_from_state(x, z)
        return self.extension(z)[0]

    def __call__(self, Z) -> np.ndarray:
        """Single key (q,) -> (p,); batch (M, q) -> (M, p)."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            return self.evaluate(Z)
        return np.array([self.evaluate(z) for z in Z]).reshape(len(Z), self.p)

    # -- serialisation --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "L": self.L,
            "lipschitz_estimate": self.lipschitz_estimate,
            "lipschitz": self.lipschitz,
            "input_dim": self.q,
            "output_dim": self.p,
            "source": None if self.source is None else list(self.source),
            "key_order": self.key_order,
            "margin": self.margin,
            "notes": list(self.notes),
            "Z": self.Z.tolist(),
            "V": self.V.tolist(),
            "X": None if self.X is None else self.X.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, system=None, box=None) -> "SampledFunction":
        q, p = int(d["input_dim"]), int(d["output_dim"])
        Z = np.array(d["Z"], dtype=float).reshape(-1, q)
        V = np.array(d["V"], dtype=float).reshape(-1, p)
        X = None if d.get("X") is None else np.array(d["X"], dtype=float)
        src = d.get("source")
        return cls(
            name=d["name"],
            Z=Z,
            V=V,
            mode=d["mode"],
            L=float(d["L"]),
            lipschitz_estimate=float(d["lipschitz_estimate"]),
            lipschitz=bool(d["lipschitz"]),
            X=X,
            source=None if src is None else (str(src[0]), int(src[1])),
            key_order=d.get("key_order"),
            system=system,
            box=box,
            margin=float(d.get("margin", 0.0)),
            notes=list(d.get("notes", [])),
        )


def check_consistency(Z, V, L: float, atol: float = 1e-12) -> None:
    """Raise :class:`InconsistentSamples` unless |v_i - v_j| <= L |z_i - z_j|
    for every pair (max-norm over output components)."""
    Z = np.asarray(Z, dtype=float)
    V = np.asarray(V, dtype=float)
    if len(Z) < 2:
        return
    worst, i, j = _kernels.consistency_excess(Z, V, L)
    scale = 1.0 + float(np.max(np.abs(V)))
    if worst > atol * scale:
        raise InconsistentSamples(
            f"samples {i} and {j} violate the Lipschitz bound L={L:g} by {worst:g}", (i, j), worst
        )


def mcshane_extend(Z, V, L: float, *, name: str = "f") -> SampledFunction:
    """Global L-Lipschitz extension of the table (rejects inconsistent tables)."""
    if not L >= 0:
        raise ValueError("Lipschitz constant must be >= 0")
    Z = np.asarray(Z, dtype=float)
    V = np.asarray(V, dtype=float)
    Z = Z.reshape(len(Z), -1)
    V = V.reshape(len(V), -1)
    check_consistency(Z, V, L)
    return SampledFunction(name, Z, V, MCSHANE, float(L), float(L), True)


def nearest_extend(Z, V, *, name: str = "f") -> SampledFunction:
    Z = np.asarray(Z, dtype=float)
    V = np.asarray(V, dtype=float)
    return SampledFunction(name, Z.reshape(len(Z), -1), V.reshape(len(V), -1), NEAREST, 0.0, 0.0, False)
