"""Input signals u(t) and a fixed-step RK4 stepper."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class InputSignal:
    """Callable ``u(t) -> ndarray (m,)``."""

    m: int

    def __call__(self, t: float) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def to_dict(self) -> dict:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantInput(InputSignal):
    value: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.value)

    def __call__(self, t):
        return np.array(self.value, dtype=float)

    def to_dict(self):
        return {"kind": "constant", "value": list(self.value)}


@dataclass(frozen=True)
class PiecewiseConstantInput(InputSignal):
    """``values[k]`` holds on [times[k], times[k+1]); the last value persists."""

    times: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be nonempty and of equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("switching times must increase")

    @property
    def m(self) -> int:
        return len(self.values[0])

    def __call__(self, t):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return np.array(self.values[max(k, 0)], dtype=float)

    def to_dict(self):
        return {"kind": "piecewise", "times": list(self.times), "values": [list(v) for v in self.values]}


class ExpressionInput(InputSignal):
    """Each component is an expression in ``t`` (e.g. ``"-1 + 0.1*sin(t)"``)."""

    def __init__(self, texts: Sequence[str]):
        from .exprdsl import compile_scalar, parse_expression

        self.texts = tuple(texts)
        exprs = [parse_expression(s, ["t"], []) for s in self.texts]
        self._fn = compile_scalar(exprs)

    @property
    def m(self) -> int:
        return len(self.texts)

    def __call__(self, t):
        return np.array(self._fn((t,)), dtype=float)

    def to_dict(self):
        return {"kind": "expression", "expr": list(self.texts)}


def signal_from_config(desc, m: int | None = None) -> InputSignal:
    """Build a signal from a number, a list, an expression in t, or a dict
    with a ``kind`` key."""
    if isinstance(desc, InputSignal):
        return desc
    if isinstance(desc, (int, float)):
        return ConstantInput((float(desc),) * (m or 1))
    if isinstance(desc, str):
        return ExpressionInput([desc])
    if isinstance(desc, (list, tuple)):
        return ConstantInput(tuple(float(v) for v in desc))
    kind = desc.get("kind", "constant")
    if kind == "constant":
        v = desc["value"]
        return signal_from_config(v, m)
    if kind == "piecewise":
        return PiecewiseConstantInput(
            tuple(float(t) for t in desc["times"]),
            tuple(tuple(float(a) for a in (v if isinstance(v, (list, tuple)) else [v])) for v in desc["values"]),
        )
    if kind == "expression":
        e = desc["expr"]
        return ExpressionInput([e] if isinstance(e, str) else e)
    raise ValueError(f"unknown input signal kind {kind!r}")


def time_grid(T: float, dt: float) -> np.ndarray:
    """Uniform grid 0, dt, ..., N dt with N = round(T / dt)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < dt * (1 - 1e-12):
        raise ValueError("horizon T must be at least dt")
    steps = int(math.floor(T / dt + 0.5))
    return np.arange(steps + 1) * dt


def rk4_step(fun: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = fun(t, y)
    k2 = fun(t + dt / 2, y + dt / 2 * k1)
    k3 = fun(t + dt / 2, y + dt / 2 * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
