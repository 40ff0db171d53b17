"""Run configuration: one JSON document, defaults filled in, validated."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError
from .obsanalysis.box import SampleBox, Tube

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "out": "out",
    "box": {
        "lower": None,  # default: -1 on every axis
        "upper": None,  # default: +1 on every axis
        "grid": 21,
        "n_random": 0,
        "exclude": [],
    },
    "tolerances": {
        "rank_tol": 1e-8,
        "fiber_tol": 1e-9,
        "delta_min": 1e-3,
        "a_tol": 1e-6,
        "fit_tol": 1e-4,
        "inv_tol": 1e-9,
        "L_cap": 1e6,
        "blowup_threshold": 1.5,
    },
    "orders": {
        "max_order": None,  # default: 2 n + 1
        "n_t": None,
        "d_z": None,
    },
    "analysis": {
        "injectivity_delta": 0.05,
        "fiber_anchors": 64,
        "fiber_starts": 16,
        "lipschitz_r0": 0.05,
        "lipschitz_cells": 5,
        "lipschitz_orders": None,  # default: 1..n
        "dump_order": None,  # default: max_order
    },
    "form": {
        "grid": None,  # default: the analysis grid
        "margin": 0.05,
    },
    "simulation": {
        "x0": None,
        "u": 0.0,
        "T": 1.0,
        "dt": 1e-3,
        "v0": None,
    },
    "observer": {
        "gain": 10.0,
        "k": None,
        "zhat0_offset": 0.0,
        "reconstruct_every": 1,
        "contraction_tol": 1e-3,
        "sweep": [],
    },
    "modulus": {
        "phi": None,
        "gamma": None,
        "s_min": 1e-4,
        "s_max": 1.0,
        "s_count": 41,
        "max_points": None,
        "fit_decades": 1.0,
    },
}

TOLERANCES = tuple(DEFAULTS["tolerances"])


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=value`` with a JSON value (bare words are taken as strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip().split("."), val


@dataclass
class RunConfig:
    """Validated configuration; ``data`` is the full merged document."""

    data: dict
    n: int
    box: SampleBox = field(init=False)

    def __post_init__(self):
        self.validate()
        self.box = self._make_box(self.data["box"]["grid"])

    # --- construction --------------------------------------------------------

    @classmethod
    def from_sources(cls, n: int, document: dict | None = None, overrides: list[str] = (),
                     **flags) -> "RunConfig":
        """Defaults, then the JSON document, then ``--set`` overrides, then
        dedicated flags (``seed``, ``out``) when not None."""
        data = _merge(DEFAULTS, document or {})
        for text in overrides:
            path, val = parse_override(text)
            node = data
            for part in path[:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"unknown config key {'.'.join(path)!r}")
                node = node[part]
            if path[-1] not in node or isinstance(node[path[-1]], dict):
                raise ConfigError(f"unknown config key {'.'.join(path)!r}")
            node[path[-1]] = val
        for key, val in flags.items():
            if val is not None:
                data[key] = val
        return cls(data, n)

    @classmethod
    def load(cls, path, n: int, overrides: list[str] = (), **flags) -> "RunConfig":
        try:
            with open(path) as fh:
                document = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_sources(n, document, overrides, **flags)

    # --- validation ----------------------------------------------------------

    def _vector(self, value, name: str, default: float | None = None) -> tuple[float, ...]:
        if value is None:
            if default is None:
                raise ConfigError(f"{name} is required")
            return (float(default),) * self.n
        if isinstance(value, (int, float)):
            return (float(value),) * self.n
        try:
            vals = tuple(float(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must be a number or a list of numbers") from exc
        if len(vals) != self.n:
            raise ConfigError(f"{name} needs {self.n} entries, got {len(vals)}")
        return vals

    def _make_box(self, grid) -> SampleBox:
        b = self.data["box"]
        lower = self._vector(b["lower"], "box.lower", -1.0)
        upper = self._vector(b["upper"], "box.upper", 1.0)
        g = tuple(int(v) for v in self._vector(grid, "box.grid"))
        try:
            exclude = tuple(Tube(tuple(int(a) for a in t["axes"]), float(t["radius"])) for t in b["exclude"])
            return SampleBox(lower, upper, g, int(b["n_random"]), int(self.data["seed"]), exclude)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid box: {exc}") from exc

    def validate(self) -> None:
        d = self.data
        for name in TOLERANCES:
            v = d["tolerances"][name]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"tolerance {name} must be a positive number")
        if not isinstance(d["seed"], int) or isinstance(d["seed"], bool) or d["seed"] < 0:
            raise ConfigError("seed must be a non-negative integer")
        o = d["orders"]
        for key in ("max_order", "n_t", "d_z"):
            if o[key] is not None and (not isinstance(o[key], int) or o[key] < 1):
                raise ConfigError(f"orders.{key} must be a positive integer")
        if o["n_t"] is not None and o["d_z"] is not None and o["d_z"] < o["n_t"] + 1:
            raise ConfigError("orders.d_z must be at least orders.n_t + 1")
        s = d["simulation"]
        if not (isinstance(s["dt"], (int, float)) and s["dt"] > 0):
            raise ConfigError("simulation.dt must be positive")
        if not (isinstance(s["T"], (int, float)) and s["T"] >= s["dt"]):
            raise ConfigError("simulation.T must be at least simulation.dt")
        if not (isinstance(d["observer"]["gain"], (int, float)) and d["observer"]["gain"] >= 1):
            raise ConfigError("observer.gain must be >= 1")
        m = d["modulus"]
        if not (0 < m["s_min"] < m["s_max"]) or int(m["s_count"]) < 2:
            raise ConfigError("modulus s-grid needs 0 < s_min < s_max and s_count >= 2")

    # --- accessors -----------------------------------------------------------

    def tol(self, name: str) -> float:
        return float(self.data["tolerances"][name])

    def section(self, name: str) -> dict:
        return self.data[name]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def out(self) -> str:
        return str(self.data["out"])

    @property
    def max_order(self) -> int:
        v = self.data["orders"]["max_order"]
        return 2 * self.n + 1 if v is None else int(v)

    def form_box(self) -> SampleBox:
        grid = self.data["form"]["grid"]
        return self.box if grid is None else self._make_box(grid)

    def x0(self) -> tuple[float, ...]:
        return self._vector(self.data["simulation"]["x0"], "simulation.x0")

    def resolved(self) -> dict:
        """The merged document with defaults that depend on n spelled out."""
        d = copy.deepcopy(self.data)
        d["box"]["lower"] = list(self.box.lower)
        d["box"]["upper"] = list(self.box.upper)
        d["box"]["grid"] = list(self.box.grid)
        d["orders"]["max_order"] = self.max_order
        return d

    def digest(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]
