"""Command-line entry point: ``triobs <command> --system FILE [options]``.

Exit codes: 0 ok, 2 parse error, 3 config error, 4 construction refused,
5 domain violation at run time.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys as _sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .canonform import FormSettings, TriangularForm, assemble_triangular_form
from .config import RunConfig
from .errors import ConfigError, ConstructionRefused, DomainViolation
from .exprdsl import ExprError, ParseError, parse_system
from .liecalc import build_H, lie_table
from .obsanalysis import (
    infinitesimal_rank_check,
    injectivity_scan,
    kernel_condition_check,
    lipschitz_ratio_scan,
    modulus_estimate,
    property_a_check,
    rank_profile,
    strong_order_search,
    tangent_simulate,
)
from .observsim import ObserverConfig, run_high_gain_observer, sweep_summary
from .signals import signal_from_config

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_REFUSED = 4
EXIT_DOMAIN = 5


class _ParseFailure(Exception):
    pass


# -- output helpers -----------------------------------------------------------


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _report(command: str, system, cfg: RunConfig, results: dict, verdicts: list | None = None) -> dict:
    return {
        "version": REPORT_VERSION,
        "command": command,
        "system": {"name": system.name, "hash": system.digest, "states": list(system.state_names),
                   "inputs": list(system.input_names)},
        "config": cfg.resolved(),
        "config_hash": cfg.digest(),
        "results": results,
        "verdicts": verdicts or [],
    }


def _finish(out: Path, command: str, report: dict, files: list[str]) -> None:
    write_json(out / "report.json", report)
    # wall-clock data lives apart from report.json so reports stay byte-identical
    write_json(out / "metadata.json", {
        "command": command,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "triobs_version": __version__,
        "files": sorted(files + ["report.json"]),
    })


# -- loading ------------------------------------------------------------------


def _load_system(path):
    if path is None:
        raise ConfigError("--system is required")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _ParseFailure(f"cannot read system file {path}: {exc.strerror}") from exc
    try:
        return parse_system(text)
    except ExprError as exc:
        raise _ParseFailure(f"{path}: {exc}") from exc


def _load_config(args, n: int) -> RunConfig:
    flags = {"seed": args.seed, "out": args.out}
    if args.config is None:
        return RunConfig.from_sources(n, None, args.set or [], **flags)
    return RunConfig.load(args.config, n, args.set or [], **flags)


def _load_form(path, system) -> TriangularForm:
    if path is None:
        raise ConfigError("--form is required for this command")
    if not Path(path).is_file():
        raise ConfigError(f"form file {path} does not exist")
    try:
        return TriangularForm.load(path, system)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load form {path}: {exc}") from exc


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _form_settings(cfg: RunConfig) -> FormSettings:
    a = cfg.section("analysis")
    return FormSettings(
        fiber_tol=cfg.tol("fiber_tol"),
        a_tol=cfg.tol("a_tol"),
        fit_tol=cfg.tol("fit_tol"),
        L_cap=cfg.tol("L_cap"),
        blowup_threshold=cfg.tol("blowup_threshold"),
        margin=float(cfg.section("form")["margin"]),
        delta_min=cfg.tol("delta_min"),
        fiber_anchors=int(a["fiber_anchors"]),
        fiber_starts=int(a["fiber_starts"]),
    )


# -- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    print(json.dumps(jsonable({
        "system": system.name,
        "hash": system.digest,
        "states": list(system.state_names),
        "inputs": list(system.input_names),
        "config_hash": cfg.digest(),
        "box": cfg.box.to_dict(),
        "samples": len(cfg.box.points),
    }), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_dump_lie(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    K = args.order or cfg.section("analysis")["dump_order"] or cfg.max_order
    for line in lie_table(system).dump(int(K)):
        print(line)
    return EXIT_OK


def _kernel_summary(checks) -> dict:
    bad = [c for c in checks if c.violated]
    return {
        "points_checked": len(checks),
        "violations": len(bad),
        "max_projection": max((c.magnitude for c in checks), default=0.0),
        "examples": [c.to_dict() for c in bad[:5]],
    }


def cmd_analyze(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    out = _out_dir(cfg)
    box, n = cfg.box, system.n
    a = cfg.section("analysis")
    rank_tol, fiber_tol = cfg.tol("rank_tol"), cfg.tol("fiber_tol")
    delta = float(a["injectivity_delta"])

    profiles = [rank_profile(system, i, box, rank_tol) for i in range(1, cfg.max_order + 1)]
    write_csv(out / "rank_profile.csv", [*system.state_names, "order", "rank", "sigma_min"],
              (row for p in profiles for row in p.csv_rows()))

    orders = strong_order_search(system, cfg.max_order, box, rank_tol=rank_tol, delta=delta,
                                 fiber_tol=fiber_tol)

    injectivity, all_pairs = {}, []
    for i in range(1, n + 2):
        pairs = injectivity_scan(build_H(system, i), box, delta, fiber_tol=fiber_tol)
        injectivity[str(i)] = {"injective": not pairs, "collisions": len(pairs),
                               "example": pairs[0].to_dict() if pairs else None}
        all_pairs += pairs

    prop_a, kernels, verdicts = {}, {}, []
    for i in range(1, n + 2):
        rep = property_a_check(system, i, box, a_tol=cfg.tol("a_tol"), anchors=int(a["fiber_anchors"]),
                               starts=int(a["fiber_starts"]), fiber_tol=fiber_tol,
                               delta_min=cfg.tol("delta_min"), rank_tol=rank_tol)
        prop_a[str(i)] = rep.to_dict()
        all_pairs += rep.pairs
        verdicts.append({"check": f"fiber_consistency[{i}]", "passed": rep.passed,
                         "evidences": f"g_{i} exists as a continuous function of H_{i}",
                         "detail": "vacuous (no fibers found)" if rep.vacuous else
                         f"max gap {rep.max_discrepancy:.3g} over {len(rep.pairs)} fiber pairs"})
        kc = _kernel_summary(kernel_condition_check(system, i, box, rank_tol=rank_tol))
        kernels[str(i)] = kc
        verdicts.append({"check": f"kernel_condition[{i}]", "passed": kc["violations"] == 0,
                         "evidences": f"g_{i} can be locally Lipschitz at singular points of H_{i}",
                         "detail": f"{kc['violations']} of {kc['points_checked']} rank-deficient samples violate"})
    write_csv(out / "fiber_pairs.csv",
              [*(f"xa{k + 1}" for k in range(n)), *(f"xb{k + 1}" for k in range(n)), "order", "dH", "sep", "dLg"],
              (p.csv_row() for p in all_pairs))

    lip_orders = a["lipschitz_orders"] or list(range(1, n + 1))
    scans, lip_rows = {}, []
    for i in lip_orders:
        scan = lipschitz_ratio_scan(system, int(i), box, float(a["lipschitz_r0"]), cells=int(a["lipschitz_cells"]),
                                    blowup_threshold=cfg.tol("blowup_threshold"))
        scans[str(i)] = scan.summary()
        lip_rows += [[int(i), *row] for row in scan.csv_rows()]
        verdicts.append({"check": f"lipschitz_ratio[{i}]", "passed": scan.bounded,
                         "evidences": f"g_{i} is Lipschitz on the box",
                         "detail": f"estimate {scan.estimate:.4g}, {len(scan.flagged_cells)} cells flagged"})
    write_csv(out / "lipschitz.csv", ["order", *(f"c{k + 1}" for k in range(n)), "local_L", "flagged"], lip_rows)

    weak = orders.weak_order
    verdicts.insert(0, {"check": "differential_observability", "passed": weak is not None,
                        "evidences": "an injective observability map exists",
                        "detail": f"weak order {weak}, strong order {orders.strong_order}"})
    n_t = 0
    while str(n_t + 1) in prop_a and prop_a[str(n_t + 1)]["passed"]:
        n_t += 1
    applicable = weak is not None and n_t >= 1
    lipschitz_ok = all(s["bounded"] for s in scans.values())
    verdicts.append({"check": "triangular_form", "passed": applicable,
                     "evidences": "a triangular form with Psi = H_dz solves the observer problem",
                     "detail": (f"suggested d_z = {max(weak, n_t + 1)}, n_t = {n_t}; "
                                f"{'Lipschitz' if lipschitz_ok else 'non-Lipschitz terms present'}")
                     if applicable else "no injective H_i found or fiber consistency fails at order 1"})

    results = {
        "rank_profiles": [p.summary() for p in profiles],
        "orders": orders.to_dict(),
        "injectivity": injectivity,
        "property_a": prop_a,
        "kernel_condition": kernels,
        "lipschitz": scans,
        "notes": ["uniform infinitesimal observability is necessary for Lipschitz g_i; "
                  "sufficiency is not assumed"],
    }
    _finish(out, "analyze", _report("analyze", system, cfg, results, verdicts),
            ["rank_profile.csv", "fiber_pairs.csv", "lipschitz.csv"])
    print(f"weak order {weak}, strong order {orders.strong_order}; report in {out / 'report.json'}")
    return EXIT_OK


def _orders_for_form(cfg: RunConfig) -> tuple[int, int]:
    o = cfg.section("orders")
    if o["d_z"] is None and o["n_t"] is None:
        raise ConfigError("transform needs orders.d_z (and optionally orders.n_t)")
    d_z = o["d_z"] if o["d_z"] is not None else o["n_t"] + 1
    n_t = o["n_t"] if o["n_t"] is not None else d_z - 1
    return int(n_t), int(d_z)


def cmd_transform(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    out = _out_dir(cfg)
    n_t, d_z = _orders_for_form(cfg)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            form = assemble_triangular_form(system, n_t, d_z, cfg.form_box(), _form_settings(cfg))
    except ConstructionRefused as exc:
        print(f"construction refused: {exc}", file=_sys.stderr)
        if exc.witness is not None:
            print("witness: " + json.dumps(jsonable(exc.witness.to_dict())), file=_sys.stderr)
        return EXIT_REFUSED
    path = Path(args.form) if args.form else out / "form.json"
    form.save(path)
    results = {
        "form_file": str(path),
        "d_z": d_z,
        "n_t": n_t,
        "lipschitz": form.lipschitz_flags,
        "lipschitz_constants": {f.name: f.L for f in form.g + [form.phi]},
        "full_dependence": form.full_dependence,
        "fit_errors": form.fit_errors,
        "image_box": {"lower": form.image_lo, "upper": form.image_hi},
        "notes": form.notes + [str(w.message) for w in caught],
    }
    verdicts = [{"check": f"lipschitz[{name}]", "passed": ok,
                 "evidences": f"{name} admits a Lipschitz extension on the sampled image", "detail": ""}
                for name, ok in form.lipschitz_flags.items()]
    _finish(out, "transform", _report("transform", system, cfg, results, verdicts),
            [] if args.form else ["form.json"])
    print(f"form written to {path}")
    return EXIT_OK


def _observer_config(cfg: RunConfig, run: dict | None = None) -> ObserverConfig:
    o = dict(cfg.section("observer"))
    o.update({k: v for k, v in (run or {}).items() if k in ("gain", "k", "zhat0_offset")})
    k = None if o["k"] is None else tuple(o["k"])
    off = o["zhat0_offset"]
    off = tuple(off) if isinstance(off, list) else float(off)
    return ObserverConfig(gain=float(o["gain"]), k=k, zhat0_offset=off,
                          reconstruct_every=int(o["reconstruct_every"]),
                          contraction_tol=float(o["contraction_tol"]))


def cmd_simulate(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    form = _load_form(args.form, system)
    out = _out_dir(cfg)
    s = cfg.section("simulation")
    u = signal_from_config(s["u"], system.m)
    res = run_high_gain_observer(system, form, _observer_config(cfg), cfg.x0(), u, float(s["T"]), float(s["dt"]),
                                 box=form.box)
    res.write_csv(out / "traces.csv", system.n)
    files = ["traces.csv"]
    runs = {}
    for k, run in enumerate(cfg.section("observer")["sweep"]):
        label = str(run.get("label", f"run{k}"))
        x0 = run.get("x0", s["x0"])
        uu = signal_from_config(run.get("u", s["u"]), system.m)
        runs[label] = run_high_gain_observer(system, form, _observer_config(cfg, run), x0, uu, float(s["T"]),
                                             float(s["dt"]), box=form.box)
    if runs:
        write_json(out / "sweep_summary.json", sweep_summary(runs))
        files.append("sweep_summary.json")
    summary = res.summary()
    results = {"observer": summary, "form_config_hash": form.settings.digest(), "input": u.to_dict()}
    verdicts = [{"check": "observer_convergence", "passed": summary["converged"],
                 "evidences": "high-gain observer contracts on this form", "detail":
                 f"final z-error {summary['final_err_z']:.3g}"}]
    _finish(out, "simulate", _report("simulate", system, cfg, results, verdicts), files)
    if res.truncated:
        print("true trajectory left the form's box: " + "; ".join(res.notes), file=_sys.stderr)
        return EXIT_DOMAIN
    print(f"final z-error {summary['final_err_z']:.3g}; traces in {out / 'traces.csv'}")
    return EXIT_OK


def cmd_tangent_sim(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    out = _out_dir(cfg)
    s = cfg.section("simulation")
    if s["v0"] is None:
        raise ConfigError("tangent-sim needs simulation.v0")
    v0 = cfg._vector(s["v0"], "simulation.v0")
    x0 = cfg.x0()
    u = signal_from_config(s["u"], system.m)
    try:
        trace = tangent_simulate(system, x0, v0, u, float(s["T"]), float(s["dt"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n = system.n
    write_csv(out / "tangent_trace.csv",
              ["t", *system.state_names, *(f"v{k + 1}" for k in range(n)), "w"], trace.csv_rows())
    summ = trace.summary()
    K = cfg.section("orders")["d_z"] or n + 1
    results = {"trace": summ, "input": u.to_dict()}
    if hasattr(u, "value"):
        results["infinitesimal_rank"] = infinitesimal_rank_check(
            system, x0, u.value, int(K), rank_tol=cfg.tol("rank_tol")).to_dict()
    verdicts = [{"check": "infinitesimal_observability", "passed": not summ["witness"],
                 "evidences": "the tangent output separates the initial direction",
                 "detail": "unobservable tangent direction witnessed" if summ["witness"] else
                 f"sup |w| = {summ['sup_w']:.3g}"}]
    _finish(out, "tangent-sim", _report("tangent-sim", system, cfg, results, verdicts), ["tangent_trace.csv"])
    print(f"sup |w| = {summ['sup_w']:.3g}, witness = {summ['witness']}")
    return EXIT_OK


def cmd_modulus(args) -> int:
    system = _load_system(args.system)
    cfg = _load_config(args, system.n)
    out = _out_dir(cfg)
    m = cfg.section("modulus")
    if m["phi"] is None or m["gamma"] is None:
        raise ConfigError("modulus needs modulus.phi and modulus.gamma expressions")
    s = np.logspace(math.log10(m["s_min"]), math.log10(m["s_max"]), int(m["s_count"]))
    est = modulus_estimate(system, m["phi"], m["gamma"], cfg.box, s, max_points=m["max_points"],
                           fit_decades=float(m["fit_decades"]))
    write_csv(out / "modulus.csv", ["s", "rho0"], est.csv_rows())
    results = {"modulus": est.summary()}
    _finish(out, "modulus", _report("modulus", system, cfg, results), ["modulus.csv"])
    print(f"fitted exponent {est.exponent:.4g}")
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "parse a system (and config) and print a summary"),
    "dump-lie": (cmd_dump_lie, "print L_f^k h and L_g L_f^k h"),
    "analyze": (cmd_analyze, "rank, injectivity, fiber and Lipschitz diagnostics"),
    "transform": (cmd_transform, "build a triangular form and write it as JSON"),
    "simulate": (cmd_simulate, "run the high-gain observer on a saved form"),
    "tangent-sim": (cmd_tangent_sim, "simulate the tangent system and test its output"),
    "modulus": (cmd_modulus, "sampled modulus of continuity of phi with respect to gamma"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triobs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"triobs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--system", help="system definition file")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--form", help="form JSON (input for simulate, output path for transform)")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config 'seed')")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. --set orders.d_z=4 (repeatable)")
        if name == "dump-lie":
            p.add_argument("--order", type=int, help="highest derivative order K")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (_ParseFailure, ParseError) as exc:
        print(f"parse error: {exc}", file=_sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except ConstructionRefused as exc:
        print(f"construction refused: {exc}", file=_sys.stderr)
        return EXIT_REFUSED
    except DomainViolation as exc:
        print(f"domain violation: {exc}", file=_sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    _sys.exit(main())
