"""High-gain observer on a triangular form and state reconstruction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ..canonform.build import TriangularForm
from ..canonform.inverse import INV_TOL, left_inverse
from ..errors import ConfigError, InverseError, NoConvergence
from ..exprdsl import ControlAffineSystem
from ..obsanalysis.box import SampleBox
from ..signals import InputSignal, rk4_step, signal_from_config, time_grid

OBSERVER_BOUND = 1e6


def design_gain(d_z: int) -> tuple[int, ...]:
    """Coefficients k_1..k_{d_z} of (s + 1)^{d_z} below the leading term."""
    if d_z < 1:
        raise ValueError("d_z must be >= 1")
    return tuple(comb(d_z, j) for j in range(1, d_z + 1))


def routh_hurwitz(coeffs) -> bool:
    """True when s^d + c_1 s^{d-1} + ... + c_d has all roots in Re s < 0.

    Routh table; any zero or sign change in the first column fails.
    """
    a = [1.0] + [float(c) for c in coeffs]
    d = len(a) - 1
    if d == 0:
        return True
    rows = [a[0::2], a[1::2]]
    width = len(rows[0])
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    for _ in range(d - 1):
        p, q = rows[-2], rows[-1]
        if q[0] == 0.0:
            return False
        nxt = [(q[0] * p[j + 1] - p[0] * q[j + 1]) / q[0] for j in range(width - 1)] + [0.0]
        rows.append(nxt)
    first = [r[0] for r in rows[: d + 1]]
    return all(v > 0 for v in first)


@dataclass
class ObserverConfig:
    gain: float = 10.0
    k: tuple[float, ...] | None = None
    zhat0: tuple[float, ...] | None = None
    zhat0_offset: tuple[float, ...] | float = 0.0
    saturation_lo: tuple[float, ...] | None = None
    saturation_hi: tuple[float, ...] | None = None
    reconstruct_every: int = 1
    contraction_tol: float = 1e-3

    def resolved(self, form: TriangularForm) -> "ObserverConfig":
        """Fill defaults from the form and validate."""
        dz = form.d_z
        k = tuple(float(v) for v in (self.k if self.k is not None else design_gain(dz)))
        if len(k) != dz:
            raise ConfigError(f"gain vector needs {dz} entries, got {len(k)}")
        if not routh_hurwitz(k):
            raise ConfigError(f"s^{dz} + k_1 s^{dz - 1} + ... is not Hurwitz for k={k}")
        if not self.gain >= 1:
            raise ConfigError("high-gain parameter L must be >= 1")
        lo = np.array(self.saturation_lo if self.saturation_lo is not None else form.image_lo, dtype=float)
        hi = np.array(self.saturation_hi if self.saturation_hi is not None else form.image_hi, dtype=float)
        if lo.shape != (dz,) or hi.shape != (dz,) or np.any(lo >= hi):
            raise ConfigError("saturation bounds must be d_z-vectors with lo < hi")
        Zs = form.phi.Z
        if np.any(Zs.min(axis=0) < lo - 1e-12) or np.any(Zs.max(axis=0) > hi + 1e-12):
            raise ConfigError("saturation box must contain the sampled image H(C)")
        if self.reconstruct_every < 0:
            raise ConfigError("reconstruct_every must be >= 0")
        return ObserverConfig(self.gain, k, self.zhat0, self.zhat0_offset, tuple(lo), tuple(hi),
                              self.reconstruct_every, self.contraction_tol)


@dataclass
class ObserverResult:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    zhat: np.ndarray
    xhat: np.ndarray  # NaN rows where reconstruction was skipped or failed
    err_z: np.ndarray
    err_x: np.ndarray
    saturated: np.ndarray
    config: ObserverConfig
    blowup: bool = False
    failed_reconstructions: int = 0
    truncated: bool = False
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        tail = self.err_z[int(0.8 * len(self.err_z)):]
        ex = self.err_x[np.isfinite(self.err_x)]
        converged = bool(tail.size and np.max(tail) < self.config.contraction_tol)
        return {
            "initial_err_z": float(self.err_z[0]),
            "final_err_z": float(self.err_z[-1]),
            "peak_err_z": float(np.max(self.err_z)),
            "tail_peak_err_z": float(np.max(tail)) if tail.size else None,
            "final_err_x": float(ex[-1]) if ex.size else None,
            "peak_err_x": float(np.max(ex)) if ex.size else None,
            "saturated_steps": int(self.saturated.sum()),
            "blowup": self.blowup,
            "failed_reconstructions": self.failed_reconstructions,
            "converged": converged,
            "degraded": not converged,
            "truncated": self.truncated,
            "lipschitz_form": not any("not Lipschitz" in n for n in self.notes),
            "notes": self.notes,
        }

    def write_csv(self, path, n: int | None = None) -> None:
        n = self.x.shape[1] if n is None else n
        dz = self.z.shape[1]
        head = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"z{i + 1}" for i in range(dz)]
                + [f"zhat{i + 1}" for i in range(dz)] + [f"xhat{i + 1}" for i in range(n)]
                + ["err_z", "err_x", "saturated"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            for k in range(len(self.t)):
                w.writerow([repr(float(self.t[k])), *map(repr, self.x[k].tolist()), *map(repr, self.z[k].tolist()),
                            *map(repr, self.zhat[k].tolist()), *map(repr, self.xhat[k].tolist()),
                            repr(float(self.err_z[k])), repr(float(self.err_x[k])), int(self.saturated[k])])


def reconstruct_state(form: TriangularForm, z, hint=None, *, inv_tol: float = INV_TOL,
                      multistart: bool = True) -> np.ndarray:
    """x with H_{d_z}(x) = z: warm Gauss-Newton first (from ``hint``, then
    from the nearest tabulated key), multistart LM on the form's box as
    fallback.  Raises NoConvergence / AmbiguousInverse."""
    z = np.asarray(z, dtype=float)
    x = form.invert(z, hint)
    if x is None and hint is not None:
        x = form.invert(z)
    if x is not None:
        return x
    if not multistart:
        raise NoConvergence("warm-started inversion did not converge")
    res = left_inverse(form.H, z, None if hint is None else [hint], box=form.box, inv_tol=inv_tol,
                       margin=form.margin)
    if not form.box.contains(res.x, form.margin):
        raise NoConvergence("left inverse lies outside the enlarged box", res)
    return res.x


def run_high_gain_observer(
    sys: ControlAffineSystem,
    form: TriangularForm,
    cfg: ObserverConfig,
    x0,
    u: InputSignal | float | list,
    T: float,
    dt: float,
    *,
    box: SampleBox | None = None,
) -> ObserverResult:
    """Integrate the plant and the observer together with RK4.

    zhat_i' = zhat_{i+1} + g_i(sat zhat) u + k_i L^i (y - zhat_1), and the
    last row uses phi(sat zhat).  The plant output is evaluated at every
    RK4 stage, so both parts see the same time discretisation.
    """
    cfg = cfg.resolved(form)
    sig = signal_from_config(u, sys.m)
    n, dz = sys.n, form.d_z
    H = form.H
    x0 = np.asarray(x0, dtype=float).reshape(n)
    if box is not None and not box.contains(x0):
        from ..errors import TrajectoryLeftBox

        raise TrajectoryLeftBox("initial state is outside the box", 0.0, x0)
    z0 = H.value(x0)
    if cfg.zhat0 is not None:
        zh0 = np.asarray(cfg.zhat0, dtype=float).reshape(dz)
    else:
        zh0 = z0 + np.broadcast_to(np.asarray(cfg.zhat0_offset, dtype=float), (dz,))
    corr = np.array([cfg.k[i] * cfg.gain ** (i + 1) for i in range(dz)])
    lo, hi = np.array(cfg.saturation_lo), np.array(cfg.saturation_hi)
    ts = time_grid(T, dt)
    state = {"hint": None, "sat": False}

    def rhs(t, y):
        x, zh = y[:n], y[n:]
        uu = sig(t)
        xdot = sys.vector_field(x, uu)
        zc = np.minimum(np.maximum(zh, lo), hi)
        if np.any(zc != zh):
            state["sat"] = True
        ph, G, xh = form.functions(zc, state["hint"])
        if xh is not None:
            state["hint"] = xh
        zdot = np.empty(dz)
        zdot[:-1] = zh[1:]
        zdot[-1] = ph
        zdot += G @ uu + corr * (sys.output(x) - zh[0])
        return np.concatenate([xdot, zdot])

    N = len(ts)
    Y = np.empty((N, n + dz))
    Y[0] = np.concatenate([x0, zh0])
    sat = np.zeros(N, dtype=bool)
    sat[0] = bool(np.any((zh0 < lo) | (zh0 > hi)))
    blowup, truncated, notes = False, False, []
    end = N
    for k in range(1, N):
        state["sat"] = False
        Y[k] = rk4_step(rhs, ts[k - 1], Y[k - 1], dt)
        sat[k] = state["sat"]
        zh = Y[k, n:]
        if not np.all(np.isfinite(zh)) or np.max(np.abs(zh)) > OBSERVER_BOUND:
            blowup = True
            mid = (lo + hi) / 2
            Y[k, n:] = np.where(np.isfinite(zh), np.clip(zh, lo - (hi - lo) * 10, hi + (hi - lo) * 10), mid)
        if box is not None and not box.contains(Y[k, :n]):
            end, truncated = k + 1, True
            notes.append(f"true trajectory left the box at t={ts[k]:g}")
            break
    ts, Y, sat = ts[:end], Y[:end], sat[:end]
    X, Zh = Y[:, :n], Y[:, n:]
    Z = H(X)
    Xh = np.full_like(X, np.nan)
    failed = 0
    hint = x0 if cfg.zhat0 is None and not np.any(cfg.zhat0_offset) else None
    if cfg.reconstruct_every:
        for k in range(0, end, cfg.reconstruct_every):
            zc = np.minimum(np.maximum(Zh[k], lo), hi)
            try:
                Xh[k] = reconstruct_state(form, zc, hint, multistart=False)
                hint = Xh[k]
            except InverseError:
                failed += 1
        if failed:
            notes.append(f"{failed} reconstruction instants skipped (left inverse failed)")
    if blowup:
        notes.append("observer state blew up and was clamped")
    rough = sorted(name for name, ok in form.lipschitz_flags.items() if not ok)
    if rough:
        notes.append("form is not Lipschitz in " + ", ".join(rough) + "; high-gain convergence is not guaranteed")
    err_z = np.linalg.norm(Zh - Z, axis=1)
    err_x = np.linalg.norm(Xh - X, axis=1)
    return ObserverResult(ts, X, Z, Zh, Xh, err_z, err_x, sat, cfg, blowup, failed, truncated, notes)


def integrate_form(form: TriangularForm, z0, u, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 directly on the form's right-hand side (no output injection)."""
    sig = signal_from_config(u, form.system.m)
    ts = time_grid(T, dt)
    Z = np.empty((len(ts), form.d_z))
    Z[0] = np.asarray(z0, dtype=float)
    state = {"hint": None}

    def rhs(t, z):
        ph, G, xh = form.functions(z, state["hint"])
        if xh is not None:
            state["hint"] = xh
        return form.rhs_from(z, sig(t), ph, G)

    for k in range(1, len(ts)):
        Z[k] = rk4_step(rhs, ts[k - 1], Z[k - 1], dt)
    return ts, Z


def sweep_summary(runs: dict[str, ObserverResult]) -> dict:
    """Per-run peak/final errors, keyed by run label (sorted)."""
    return {label: runs[label].summary() for label in sorted(runs)}
