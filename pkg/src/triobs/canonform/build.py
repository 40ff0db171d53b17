"""Construction of phi_{d_z} and the g_i, and the assembled triangular form."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .. import _kernels
from ..errors import ConstructionRefused
from ..exprdsl import ControlAffineSystem, DomainError, compile_scalar, compile_vector, parse_system
from ..liecalc import build_H, lie_table
from ..lm import gauss_newton_point
from ..obsanalysis.box import SampleBox
from ..obsanalysis.fibers import FiberPair, injectivity_scan, property_a_check
from .sampled import MCSHANE, NEAREST, SampledFunction, check_consistency, pullback_accepted, source_exprs

FORM_FORMAT = "triobs-form"
FORM_VERSION = 1


class ObservabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FormSettings:
    fiber_tol: float = 1e-9
    a_tol: float = 1e-6
    fit_tol: float = 1e-4
    L_cap: float = 1e6
    min_pair_sep: float = 1e-4
    lipschitz_margin: float = 1.2
    blowup_threshold: float = 1.5
    probe_radius: float = 0.05
    margin: float = 0.05
    delta_min: float = 1e-3
    fiber_anchors: int = 64
    fiber_starts: int = 16
    validation_points: int = 200

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _hoelder_anchors(key_fn, val_fn, X, box, settings: FormSettings) -> np.ndarray:
    """Sample points where the local ratio |dv| / |dz| multiplies by more
    than the blowup threshold at each of two radius halvings."""
    n = X.shape[1]
    dirs = np.concatenate([np.eye(n), -np.eye(n)])
    radii = [settings.probe_radius / 2**h for h in range(3)]
    XA = np.repeat(X, len(dirs), axis=0)
    D = np.tile(dirs, (len(X), 1))
    est = []
    keep = np.ones(len(XA), dtype=bool)
    for r in radii:
        XB = XA + r * D
        keep &= box.contains(XB, settings.margin)
        dz = np.linalg.norm(key_fn(XA) - key_fn(XB), axis=1)
        dv = np.linalg.norm(val_fn(XA) - val_fn(XB), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rr = np.where(dz > 0, dv / np.where(dz > 0, dz, 1.0), 0.0)
        rr[~np.isfinite(rr)] = 0.0
        est.append(np.where(keep, rr, 0.0).reshape(len(X), len(dirs)).max(axis=1))
    e0, e1, e2 = est
    thr = settings.blowup_threshold
    grow = (e1 > thr * e0) & (e2 > thr * e1) & (e2 > 0)
    return X[grow]


def _sample_table(sys, key_order, key_dim, source, box, settings):
    X = box.points
    Z = build_H(sys, key_order)(X)[:, :key_dim]
    V = compile_vector(source_exprs(sys, source))(X)
    ok = np.all(np.isfinite(Z), axis=1) & np.all(np.isfinite(V), axis=1)
    return X[ok], Z[ok], V[ok]


def _merge_keys(X, Z, V, settings, name):
    """Collapse keys equal within fiber_tol (max norm).  Equal keys with
    values further apart than a_tol refuse the construction."""
    tree = cKDTree(Z)
    groups = tree.query_pairs(settings.fiber_tol, p=np.inf, output_type="ndarray")
    if len(groups):
        gap = np.abs(V[groups[:, 0]] - V[groups[:, 1]]).max(axis=1)
        worst = int(np.argmax(gap))
        if gap[worst] > settings.a_tol:
            i, j = groups[worst]
            pair = FiberPair(X[i].copy(), X[j].copy(), 0, float(np.abs(Z[i] - Z[j]).max()),
                             float(np.linalg.norm(X[i] - X[j])), float(gap[worst]))
            raise ConstructionRefused(
                f"{name}: equal keys carry values {gap[worst]:.6g} apart (beyond a_tol={settings.a_tol:g})", pair
            )
        drop = np.zeros(len(Z), dtype=bool)
        drop[np.maximum(groups[:, 0], groups[:, 1])] = True
        X, Z, V = X[~drop], Z[~drop], V[~drop]
    return X, Z, V


def _build(sys, name, key_order, key_dim, source, box, settings) -> SampledFunction:
    X, Z, V = _sample_table(sys, key_order, key_dim, source, box, settings)
    if not len(X):
        raise ConstructionRefused(f"{name}: no sample point of the box is in the domain")
    X, Z, V = _merge_keys(X, Z, V, settings, name)
    notes: list[str] = []
    if np.all(V == V[0]):
        return SampledFunction(name, Z, V, MCSHANE, 0.0, 0.0, True, X, source, key_order, sys, box,
                               settings.margin, notes)
    L_est = 0.0
    if len(Z) >= 2:
        L_est = _kernels.pair_ratio_max(Z, Z, V, settings.min_pair_sep)[0]
    H = build_H(sys, key_order)
    blow = _hoelder_anchors(lambda Y: H(Y)[:, :key_dim], compile_vector(source_exprs(sys, source)), X, box, settings)
    if L_est > settings.L_cap or len(blow):
        if L_est > settings.L_cap:
            notes.append(f"pairwise ratio {L_est:.3g} exceeds L_cap={settings.L_cap:g}")
        if len(blow):
            pts = ", ".join("(" + ", ".join(f"{v:.3g}" for v in p) + ")" for p in blow[:3])
            notes.append(f"ratio blows up as pairs shrink near {pts}" + (" ..." if len(blow) > 3 else ""))
        notes.append("non-Lipschitz on the compact set; nearest-sample extension")
        return SampledFunction(name, Z, V, NEAREST, 0.0, float(L_est), False, X, source, key_order, sys, box,
                               settings.margin, notes)
    L_all = _kernels.pair_ratio_max(Z, Z, V, 0.0)[0] if len(Z) >= 2 else 0.0
    L = max(settings.lipschitz_margin * L_est, L_all)
    check_consistency(Z, V, L)
    return SampledFunction(name, Z, V, MCSHANE, float(L), float(L_est), True, X, source, key_order, sys, box,
                           settings.margin, notes)


def build_phi(sys: ControlAffineSystem, d_z: int, box: SampleBox, settings: FormSettings | None = None,
              *, weak_order: int | None = None) -> SampledFunction:
    """phi_{d_z}: table of (H_{d_z}(x), L_f^{d_z} h(x)) over the box samples."""
    settings = settings or FormSettings()
    if d_z < 1:
        raise ValueError("d_z must be >= 1")
    if weak_order is not None and d_z < weak_order:
        warnings.warn(f"d_z={d_z} is below the weak observability order {weak_order}", ObservabilityWarning,
                      stacklevel=2)
    return _build(sys, f"phi_{d_z}", d_z, d_z, ("lf", d_z), box, settings)


def build_g(sys: ControlAffineSystem, i: int, n_t: int, box: SampleBox, settings: FormSettings | None = None,
            *, d_z: int | None = None, check_fibers: bool = True) -> SampledFunction:
    """g_i keyed by (z_1..z_i) for i <= n_t, by the full z otherwise.

    For i <= n_t a fiber consistency check runs first; a violation
    refuses the construction with the worst fiber pair as witness.
    """
    settings = settings or FormSettings()
    d_z = d_z if d_z is not None else n_t + 1
    if not 1 <= i <= d_z:
        raise ValueError(f"g index {i} outside 1..{d_z}")
    row = lie_table(sys).lgf(i - 1)
    trivial = all(e.is_const for e in row)
    if i <= n_t:
        if check_fibers and not trivial:
            rep = property_a_check(sys, i, box, a_tol=settings.a_tol, anchors=settings.fiber_anchors,
                                   starts=settings.fiber_starts, fiber_tol=settings.fiber_tol,
                                   delta_min=settings.delta_min, margin=settings.margin)
            if not rep.passed:
                w = rep.witness
                raise ConstructionRefused(
                    f"g_{i}: fiber consistency fails, L_g L_f^{i-1} h differs by {w.dLg:.6g} on a fiber of H_{i}",
                    w,
                )
        return _build(sys, f"g_{i}", i, i, ("lgf", i - 1), box, settings)
    return _build(sys, f"g_{i}", d_z, d_z, ("lgf", i - 1), box, settings)


@dataclass(eq=False)
class TriangularForm:
    system: ControlAffineSystem
    d_z: int
    n_t: int
    box: SampleBox
    g: list[SampledFunction]
    phi: SampledFunction
    image_lo: np.ndarray
    image_hi: np.ndarray
    settings: FormSettings = field(default_factory=FormSettings)
    notes: list[str] = field(default_factory=list)
    fit_errors: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.settings.margin

    @cached_property
    def H(self):
        return build_H(self.system, self.d_z)

    @property
    def lipschitz_flags(self) -> dict:
        flags = {f.name: f.lipschitz for f in self.g}
        flags[self.phi.name] = self.phi.lipschitz
        return flags

    @property
    def full_dependence(self) -> list[str]:
        """g_i that needed the whole z (i > n_t) and are not constant."""
        return [f.name for k, f in enumerate(self.g, 1) if k > self.n_t and not f.is_constant]

    @cached_property
    def _tree(self):
        return cKDTree(self.phi.Z)

    # -- evaluation -----------------------------------------------------------

    def invert(self, z, hint=None) -> np.ndarray | None:
        """x in the enlarged box with H_{d_z}(x) = z (Gauss-Newton from
        ``hint`` or from the nearest tabulated key), or None."""
        z = np.asarray(z, dtype=float)
        if hint is None:
            _, k = self._tree.query(z)
            hint = self.phi.X[k]
        x, res = gauss_newton_point(self.H.value_and_jac, hint, z, max_iter=20)
        if pullback_accepted(res, z, len(x)) and self.box.contains(x, self.margin):
            return x
        return None

    def functions(self, z, hint=None) -> tuple[float, np.ndarray, np.ndarray | None]:
        """(phi(z), G with rows g_i(z), pulled-back state or None)."""
        z = np.asarray(z, dtype=float)
        x = self.invert(z, hint)
        G = np.empty((self.d_z, self.system.m))
        for k, f in enumerate(self.g):
            key = z[: f.q]
            if f.is_constant:
                G[k] = f.V[0]
            elif x is not None and f.refinable:
                G[k] = f.value_from_state(x, key)
            else:
                G[k] = f.extension(key)[0]
        if self.phi.is_constant:
            ph = float(self.phi.V[0, 0])
        elif x is not None:
            ph = float(self.phi.value_from_state(x, z)[0])
        else:
            ph = float(self.phi.extension(z)[0, 0])
        return ph, G, x

    def rhs(self, z, u, hint=None) -> np.ndarray:
        ph, G, _ = self.functions(z, hint)
        return self.rhs_from(z, u, ph, G)

    def rhs_from(self, z, u, ph, G) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.empty(self.d_z)
        out[:-1] = z[1:]
        out[-1] = ph
        return out + G @ np.asarray(u, dtype=float).reshape(self.system.m)

    def saturate(self, z) -> tuple[np.ndarray, bool]:
        z = np.asarray(z, dtype=float)
        c = np.minimum(np.maximum(z, self.image_lo), self.image_hi)
        return c, bool(np.any(c != z))

    def validate(self, X) -> dict:
        """Max |g_i(H_i(x)) - L_g L_f^{i-1} h(x)| and |phi(H(x)) - L_f^{d_z} h(x)|."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Zf = self.H(X)
        out = {}
        for k, f in enumerate(self.g, 1):
            truth = compile_vector(lie_table(self.system).lgf(k - 1))(X)
            approx = f(Zf[:, : f.q])
            out[f.name] = float(np.nanmax(np.abs(approx - truth))) if len(X) else 0.0
        truth = compile_vector([lie_table(self.system).lf(self.d_z)])(X)
        out[self.phi.name] = float(np.nanmax(np.abs(self.phi(Zf) - truth))) if len(X) else 0.0
        return out

    # -- serialisation --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORM_FORMAT,
            "version": FORM_VERSION,
            "d_z": self.d_z,
            "n_t": self.n_t,
            "system": self.system.to_text(),
            "system_hash": self.system.digest,
            "config_hash": self.settings.digest(),
            "settings": asdict(self.settings),
            "box": self.box.to_dict(),
            "image_box": {"lower": self.image_lo.tolist(), "upper": self.image_hi.tolist()},
            "lipschitz": self.lipschitz_flags,
            "full_dependence": self.full_dependence,
            "notes": list(self.notes),
            "fit_errors": dict(self.fit_errors),
            "functions": [f.to_dict() for f in self.g] + [self.phi.to_dict()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d: dict, system: ControlAffineSystem | None = None) -> "TriangularForm":
        if d.get("format") != FORM_FORMAT:
            raise ValueError("not a triangular-form file")
        if int(d.get("version", 0)) != FORM_VERSION:
            raise ValueError(f"unsupported form version {d.get('version')}")
        sys = system if system is not None else parse_system(d["system"])
        if sys.digest != d["system_hash"]:
            raise ValueError("form was built for a different system (hash mismatch)")
        box = SampleBox.from_dict(d["box"])
        settings = FormSettings(**d["settings"])
        funcs = [SampledFunction.from_dict(f, sys, box) for f in d["functions"]]
        return cls(
            system=sys,
            d_z=int(d["d_z"]),
            n_t=int(d["n_t"]),
            box=box,
            g=funcs[:-1],
            phi=funcs[-1],
            image_lo=np.array(d["image_box"]["lower"], dtype=float),
            image_hi=np.array(d["image_box"]["upper"], dtype=float),
            settings=settings,
            notes=list(d.get("notes", [])),
            fit_errors=dict(d.get("fit_errors", {})),
        )

    @classmethod
    def from_json(cls, text: str, system: ControlAffineSystem | None = None) -> "TriangularForm":
        return cls.from_dict(json.loads(text), system)

    @classmethod
    def load(cls, path, system: ControlAffineSystem | None = None) -> "TriangularForm":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read(), system)


def assemble_triangular_form(
    sys: ControlAffineSystem,
    n_t: int,
    d_z: int,
    box: SampleBox,
    settings: FormSettings | None = None,
    *,
    check_injectivity: bool = True,
) -> TriangularForm:
    """Build every g_i and phi_{d_z} with Psi = H_{d_z}.

    Only a fiber consistency refusal (or equal keys with different values) stops
    the construction; Lipschitz failures are recorded per function.
    """
    settings = settings or FormSettings()
    if n_t < 0 or d_z < n_t + 1:
        raise ValueError("need d_z >= n_t + 1")
    notes = []
    if check_injectivity:
        coll = injectivity_scan(build_H(sys, d_z), box, max(settings.delta_min, 1e-2), fiber_tol=settings.fiber_tol)
        if coll:
            notes.append(f"H_{d_z} collisions found on the samples ({len(coll)}); z does not determine x there")
    g = [build_g(sys, i, n_t, box, settings, d_z=d_z) for i in range(1, d_z + 1)]
    phi = build_phi(sys, d_z, box, settings)
    Zs = phi.Z
    pad = settings.margin * np.maximum(Zs.max(axis=0) - Zs.min(axis=0), 1e-9)
    form = TriangularForm(sys, d_z, n_t, box, g, phi, Zs.min(axis=0) - pad, Zs.max(axis=0) + pad, settings, notes)
    for f in g + [phi]:
        if not f.lipschitz:
            notes.append(f"{f.name} is not Lipschitz on the compact set")
    if form.full_dependence:
        notes.append("full-z dependence needed for: " + ", ".join(form.full_dependence))
    if settings.validation_points:
        X = box.uniform(settings.validation_points, stream=53)
        form.fit_errors = form.validate(X)
    return form


@dataclass
class ResidualReport:
    per_component: np.ndarray
    max_residual: float
    t: np.ndarray

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "per_component": self.per_component.tolist()}


def residual_check(form: TriangularForm, sys: ControlAffineSystem, x0, u, T: float, dt: float,
                   *, box: SampleBox | None = None) -> ResidualReport:
    """Max over the trajectory of |dH/dx (f + g u) - RHS_form(H(x), u)|."""
    from ..observsim.simulate import integrate_system
    from ..signals import signal_from_config

    sig = signal_from_config(u, sys.m)
    traj = integrate_system(sys, x0, sig, T, dt, box=box if box is not None else form.box, strict=True)
    H = form.H
    worst = np.zeros(form.d_z)
    hint = None
    for t, x in zip(traj.t, traj.x):
        uu = sig(t)
        z, J = H.value_and_jac(x)
        zdot = J @ sys.vector_field(x, uu)
        ph, G, hint = form.functions(z, hint)
        worst = np.maximum(worst, np.abs(zdot - form.rhs_from(z, uu, ph, G)))
    return ResidualReport(worst, float(worst.max()), traj.t)
