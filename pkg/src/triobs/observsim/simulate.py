"""Fixed-step RK4 simulation of the original system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IntegrationBlowup, TrajectoryLeftBox
from ..exprdsl import ControlAffineSystem, DomainError
from ..obsanalysis.box import SampleBox
from ..signals import InputSignal, rk4_step, signal_from_config, time_grid

BLOWUP_BOUND = 1e8


@dataclass
class Trajectory:
    dt: float
    T: float
    t: np.ndarray
    x: np.ndarray  # (N, n)
    u: np.ndarray  # (N, m)
    truncated: bool = False
    reason: str = ""
    z: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.t) == len(self.x) == len(self.u)):
            raise ValueError("trajectory arrays must have equal length")

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def integrate_system(
    sys: ControlAffineSystem,
    x0,
    u: InputSignal | float | list,
    T: float,
    dt: float,
    *,
    box: SampleBox | None = None,
    margin: float = 0.0,
    bound: float = BLOWUP_BOUND,
    strict: bool = False,
    observe: int | None = None,
) -> Trajectory:
    """RK4 on x' = f(x) + g(x) u(t) over the grid 0, dt, ..., T.

    Leaving the box (if given) or a domain error truncates the trace and
    sets ``truncated``; with ``strict`` these raise instead.  Blowup
    (|x| > bound or non-finite) always raises.  ``observe=d`` also stores
    z = H_d(x).
    """
    sig = signal_from_config(u, sys.m)
    ts = time_grid(T, dt)
    n = sys.n
    X = np.empty((len(ts), n))
    U = np.empty((len(ts), sys.m))
    X[0] = np.asarray(x0, dtype=float).reshape(n)
    U[0] = sig(ts[0])
    if box is not None and not box.contains(X[0], margin):
        raise TrajectoryLeftBox("initial state is outside the box", 0.0, X[0])

    def rhs(t, x):
        return sys.vector_field(x, sig(t))

    end, reason = len(ts), ""
    for k in range(1, len(ts)):
        try:
            X[k] = rk4_step(rhs, ts[k - 1], X[k - 1], dt)
        except DomainError as exc:
            end, reason = k, f"domain error at t={ts[k]:g}: {exc}"
            break
        U[k] = sig(ts[k])
        if not np.all(np.isfinite(X[k])) or np.max(np.abs(X[k])) > bound:
            raise IntegrationBlowup(f"integration blew up at t={ts[k]:g}", ts[k], X[k])
        if box is not None and not box.contains(X[k], margin):
            end, reason = k, f"left the box at t={ts[k]:g}"
            break
    if reason and strict:
        raise TrajectoryLeftBox(f"trajectory {reason}", ts[end], X[end] if end < len(ts) else None)
    traj = Trajectory(dt, float(ts[end - 1]), ts[:end], X[:end], U[:end], bool(reason), reason)
    if observe:
        from ..liecalc import build_H

        traj.z = build_H(sys, observe)(traj.x)
    return traj
