"""Command-line front end: analysis, thresholds, dispersion curves, runs, sweeps.

Every command reads a single JSON config, validates it against the module
preconditions, and writes its outputs into a directory named by the hash of
the fully-resolved config, alongside a manifest that reproduces the run.
Exit codes: 0 success, 2 config/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, convergence, turing
from . import diffusivity as dv
from . import pde
from .kinetics import (
    ReactionParams,
    RegimeError,
    classify_equilibrium,
    classify_regime,
    coexistence,
    equilibria,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# config handling


def load_config(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    return cfg


def _reaction_from(cfg: dict) -> ReactionParams:
    try:
        spec = dict(cfg["model"]["reaction"])
    except KeyError as exc:
        raise ConfigError("config requires model.reaction") from exc
    try:
        return ReactionParams(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid reaction parameters: {exc}") from exc


def _rates_from(cfg: dict, params: ReactionParams) -> dv.TransitionRates:
    spec = dict(cfg["model"].get("rates", {"family": "skt_linear"}))
    family = spec.pop("family", "skt_linear")
    try:
        if family == "skt_linear":
            # default range: 10% above the logistic carrying value of v
            m = spec.pop("m", 1.1 * params.r_v / params.r22)
            rates = dv.skt_linear(m)
        elif family == "affine":
            rates = dv.affine(spec.pop("a0"), spec.pop("b0"))
        elif family == "power_law":
            rates = dv.power_law(spec.pop("a0"), spec.pop("b0"), spec.pop("p"), spec.pop("q"))
        elif family == "custom":
            rates = dv.custom(spec.pop("w"), spec.pop("h"), spec.pop("k"))
        else:
            raise ConfigError(f"unknown rate family {family!r}")
    except KeyError as exc:
        raise ConfigError(f"rate family {family!r} is missing parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid rate family parameters: {exc}") from exc
    if spec:
        raise ConfigError(f"unused rate parameters: {sorted(spec)}")
    return rates


def build_model(cfg: dict) -> pde.ModelSpec:
    model_cfg = cfg.get("model")
    if not isinstance(model_cfg, dict):
        raise ConfigError("config requires a model section")
    params = _reaction_from(cfg)
    rates = _rates_from(cfg, params)
    dds = None
    if model_cfg.get("dds") is not None:
        try:
            dds = dv.DdsParams(**model_cfg["dds"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid dds parameters: {exc}") from exc
    try:
        return pde.ModelSpec(
            variant=model_cfg.get("variant", "skt_plus_limit"),
            params=params,
            rates=rates,
            dds=dds,
            epsilon=model_cfg.get("epsilon"),
            reaction_enabled=model_cfg.get("reaction_enabled", True),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def build_grid(cfg: dict) -> pde.Grid1D:
    g = cfg.get("grid", {})
    try:
        return pde.Grid1D(length=g.get("length", 10.0), n=g.get("n", 128))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def build_controls(cfg: dict) -> pde.Controls:
    t = cfg.get("time", {})
    try:
        return pde.Controls(
            dt_max=t.get("dt_max") if t.get("dt_max") is not None else math.inf,
            safety=t.get("safety", 0.8),
            snapshot_dt=t.get("snapshot_dt"),
            method=t.get("method", "rk4"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid time controls: {exc}") from exc


def resolve_config(cfg: dict, seed: int | None = None) -> dict:
    """Fill defaults so the manifest records exactly what was run."""
    model = cfg.get("model", {})
    time_cfg = cfg.get("time", {})
    grid_cfg = cfg.get("grid", {})
    pert = cfg.get("perturbation", {"kind": "none"})
    params = _reaction_from(cfg)
    rates_cfg = dict(model.get("rates", {"family": "skt_linear"}))
    if rates_cfg.get("family", "skt_linear") == "skt_linear" and "m" not in rates_cfg:
        rates_cfg["m"] = 1.1 * params.r_v / params.r22
        rates_cfg["family"] = "skt_linear"
    resolved = {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "variant": model.get("variant", "skt_plus_limit"),
            "reaction": dataclasses.asdict(params),
            "rates": rates_cfg,
            "dds": model.get("dds"),
            "epsilon": model.get("epsilon"),
            "reaction_enabled": model.get("reaction_enabled", True),
        },
        "grid": {"length": grid_cfg.get("length", 10.0), "n": grid_cfg.get("n", 128)},
        "time": {
            "t_end": time_cfg.get("t_end", 100.0),
            "dt_max": time_cfg.get("dt_max"),
            "safety": time_cfg.get("safety", 0.8),
            "snapshot_dt": time_cfg.get("snapshot_dt"),
            "method": time_cfg.get("method", "rk4"),
        },
        "perturbation": {
            "kind": pert.get("kind", "none"),
            "mode": pert.get("mode", 1),
            "amplitude": pert.get("amplitude", 0.0),
            "amplitude_rel": pert.get("amplitude_rel"),
        },
        "seed": seed if seed is not None else cfg.get("seed", 0),
    }
    return resolved


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _run_dir(out: str | Path, resolved: dict, command: str) -> Path:
    run = Path(out) / f"{config_hash(resolved)}-{command}"
    run.mkdir(parents=True, exist_ok=True)
    return run


def write_json(path: Path, payload) -> None:
    def default(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return dataclasses.asdict(obj)
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, float) and math.isnan(obj):
            return None
        raise TypeError(f"cannot serialize {type(obj)}")

    text = json.dumps(payload, sort_keys=True, indent=2, default=default, allow_nan=True)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


def write_manifest(run_dir: Path, resolved: dict, command: str, outputs: list[str], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": resolved,
        "config_hash": config_hash(resolved),
        "outputs": sorted(outputs),
        "package_version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_json(run_dir / "manifest.json", manifest)


# ----------------------------------------------------------------------
# commands


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    resolved = resolve_config(cfg, args.seed)
    reg = classify_regime(model.params)
    eqs = []
    for eq in equilibria(model.params):
        eqs.append(
            {
                "u": eq.u,
                "v": eq.v,
                "kind": eq.kind,
                "stability": classify_equilibrium(model.params, eq),
            }
        )
    report = {"regime": {"tag": reg.tag, "R": reg.R, "S": reg.S, "T": reg.T}, "equilibria": eqs}
    run_dir = _run_dir(args.out, resolved, "analyze")
    write_json(run_dir / "analysis.json", report)
    write_manifest(run_dir, resolved, "analyze", ["analysis.json"])
    _say(args, f"analyze: {reg.tag} regime, {len(eqs)} equilibria -> {run_dir}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    resolved = resolve_config(cfg, args.seed)
    grid_len = resolved["grid"]["length"]

    if model.variant in ("skt_plus_limit", "skt_fast_plus"):
        rep = turing.turing_threshold_plus(model.params, model.rates, length=grid_len)
        payload = dataclasses.asdict(rep)
        payload["kind"] = "avoidance_threshold"
    elif model.variant in ("skt_minus_limit", "skt_fast_minus"):
        rep = turing.hiding_stability_check(model.params, model.rates)
        payload = dataclasses.asdict(rep)
        payload["kind"] = "hiding_stability"
        payload["reason"] = "hiding_cross_diffusion_cannot_destabilize"
    else:
        eq = coexistence(model.params)
        rep = turing.dds_necessary_condition(model.dds, model.rates, eq)
        payload = dataclasses.asdict(rep)
        payload["kind"] = "dds_necessary_condition"
    run_dir = _run_dir(args.out, resolved, "threshold")
    write_json(run_dir / "threshold.json", payload)
    write_manifest(run_dir, resolved, "threshold", ["threshold.json"])
    _say(args, f"threshold: {payload.get('kind')} -> {run_dir}")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    resolved = resolve_config(cfg, args.seed)
    eq = coexistence(model.params)
    coeffs = turing.dispersion_coeffs(model, eq)
    band = turing.unstable_band(coeffs)

    if args.lambda_max is not None:
        lam_max = args.lambda_max
    elif band is not None:
        lam_max = 2.0 * band.hi
    else:
        lam_max = 20.0 * (math.pi / resolved["grid"]["length"]) ** 2
    lams = np.linspace(0.0, lam_max, args.lambda_points)
    dets = turing.mode_determinant(coeffs, lams)
    rates_curve = turing.growth_rate(coeffs, coeffs.trace_j, lams)
    run_dir = _run_dir(args.out, resolved, "dispersion")
    write_csv(
        run_dir / "dispersion.csv",
        ["lambda", "mode_determinant", "growth_rate"],
        zip(lams.tolist(), dets.tolist(), np.asarray(rates_curve).tolist()),
    )
    extra = {
        "band": None if band is None else dataclasses.asdict(band),
        "coeffs": dataclasses.asdict(coeffs),
    }
    write_manifest(run_dir, resolved, "dispersion", ["dispersion.csv"], extra)
    _say(args, f"dispersion: band={band} -> {run_dir}")
    return EXIT_OK


def _initial_from_config(model: pde.ModelSpec, grid: pde.Grid1D, resolved: dict) -> pde.SimState:
    eq = coexistence(model.params)
    pert = resolved["perturbation"]
    amplitude = pert["amplitude"]
    if pert.get("amplitude_rel") is not None:
        amplitude = pert["amplitude_rel"] * eq.u
    return pde.initial_state(
        model,
        grid,
        eq.u,
        eq.v,
        perturbation=pert["kind"],
        mode=pert["mode"],
        amplitude=amplitude,
        seed=resolved["seed"],
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    grid = build_grid(cfg)
    controls = build_controls(cfg)
    resolved = resolve_config(cfg, args.seed)
    t_end = resolved["time"]["t_end"]

    state = _initial_from_config(model, grid, resolved)
    traj = pde.simulate(model, grid, state, t_end, controls)
    run_dir = _run_dir(args.out, resolved, "simulate")

    rows = []
    x = grid.x
    for i, t in enumerate(traj.times):
        for j in range(grid.n):
            rows.append([float(t), float(x[j])] + [float(traj.data[name][i, j]) for name in traj.species])
    write_csv(run_dir / "trajectory.csv", ["t", "x", *traj.species], rows)

    report = analysis.pattern_report(traj)
    write_json(run_dir / "pattern.json", dataclasses.asdict(report))
    write_manifest(
        run_dir,
        resolved,
        "simulate",
        ["trajectory.csv", "pattern.json"],
        {"diagnostics": traj.diagnostics},
    )
    _say(args, f"simulate: {traj.diagnostics['steps']} steps, amplitude {report.final_amplitude:.3e} -> {run_dir}")
    return EXIT_OK


def _parse_float_list(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("range syntax is start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from exc


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    grid = build_grid(cfg)
    resolved = resolve_config(cfg, args.seed)
    if args.epsilons is None and args.d12 is None:
        raise ConfigError("sweep needs --epsilons or --d12")

    if args.epsilons is not None:
        if model.is_fast:
            raise ConfigError("epsilon sweeps start from the limit model config")
        eps = _parse_float_list(args.epsilons)
        t_end = resolved["time"]["t_end"]
        state = _initial_from_config(model, grid, resolved)
        base = {"u": state.fields["u"], "v": state.fields["v"]}
        result = convergence.epsilon_sweep(model, grid, base, t_end, eps)
        run_dir = _run_dir(args.out, resolved, "sweep")
        rows = []
        for i, (e, err) in enumerate(zip(result.epsilons, result.errors)):
            order = result.orders[i - 1] if i >= 1 else math.nan
            rows.append([e, err, order])
        write_csv(run_dir / "sweep.csv", ["epsilon", "error", "empirical_order"], rows)
        write_manifest(
            run_dir, resolved, "sweep",
            ["sweep.csv"],
            {"sweep": {"kind": "epsilon", "norm": result.norm, "runs": result.manifests}},
        )
        _say(args, f"sweep: {len(eps)} epsilon runs -> {run_dir}")
        return EXIT_OK

    d12_values = _parse_float_list(args.d12)
    rows = []
    flip = None
    prev_unstable = None
    for d12_val in d12_values:
        coeffs = turing.avoidance_coeffs_for_d12(model.params, model.rates, d12_val)
        band = turing.unstable_band(coeffs)
        unstable = band is not None
        rows.append(
            [
                d12_val,
                int(unstable),
                band.lo if band else math.nan,
                band.hi if band else math.nan,
            ]
        )
        if prev_unstable is not None and unstable != prev_unstable and flip is None:
            flip = d12_val
        prev_unstable = unstable
    run_dir = _run_dir(args.out, resolved, "sweep")
    write_csv(run_dir / "sweep.csv", ["d12", "unstable", "lambda_lo", "lambda_hi"], rows)
    write_manifest(
        run_dir, resolved, "sweep",
        ["sweep.csv"],
        {"sweep": {"kind": "d12", "flip_at": flip}},
    )
    _say(args, f"sweep: {len(d12_values)} d12 values, flip at {flip} -> {run_dir}")
    return EXIT_OK


def cmd_classify(args) -> int:
    signs = [s for s in args.signs.replace(",", " ").split() if s]
    structure = turing.sign_classify(signs, args.d2_sign)
    payload = dataclasses.asdict(structure)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "classify.json", payload)
    if not args.quiet:
        print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdiff",
        description="Stability analysis and 1D simulation of cross-diffusion competition systems.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="path to the JSON run config")
        sp.add_argument("--out", default="runs", help="output directory (default: runs)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")

    sp = sub.add_parser("analyze", help="regime, equilibria, and their stability")
    add_common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("threshold", help="instability threshold / stability record")
    add_common(sp)
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("dispersion", help="mode determinant and growth-rate curve")
    add_common(sp)
    sp.add_argument("--lambda-max", type=float, default=None, help="upper end of the lambda grid")
    sp.add_argument("--lambda-points", type=int, default=400, help="number of lambda samples")
    sp.set_defaults(func=cmd_dispersion)

    sp = sub.add_parser("simulate", help="integrate the configured model")
    add_common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="epsilon convergence sweep or d12 threshold sweep")
    add_common(sp)
    sp.add_argument("--epsilons", default=None, help="comma list or start:stop:step")
    sp.add_argument("--d12", default=None, help="comma list or start:stop:step")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("classify", help="classify a Jacobian sign pattern")
    sp.add_argument("--signs", required=True, help="four signs, e.g. '+,-,-,-' (J11,J12,J21,J22)")
    sp.add_argument("--d2-sign", required=True, help="sign of the diffusivity v-derivative: +, -, or 0")
    sp.add_argument("--out", default=None, help="optional output directory")
    sp.add_argument("--quiet", action="store_true", help="suppress stdout JSON")
    sp.set_defaults(func=cmd_classify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RegimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pde.SimulationError, dv.PartitionConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
