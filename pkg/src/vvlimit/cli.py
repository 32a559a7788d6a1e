"""Command-line front end: subcommands, manifests, CSV artifacts.

Every subcommand reads a sectioned config file, writes its artifacts
into the output directory (flag --outdir, else the VVLIMIT_OUTDIR
environment variable, else the working directory), and tags every
manifest with the sha256 of the canonical config serialization. CSV
floats carry 17 significant digits with '.' decimal so repeated runs
are byte-identical. Exit codes: 0 success, 2 config error, 3
precondition failure, 4 blow-up, 5 fit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import energy, kernels, limit, ode
from .background import sample_lattice
from .config import (
    RunConfig,
    background_options,
    build_flow,
    build_grid,
    build_params,
    build_profile,
    build_solver_config,
    load_config,
    ode_options,
    solver_run_options,
    sweep_options,
    truncation_radius,
)
from .constants import check_conditions, derive_constants
from .errors import BlowUpError, ConfigError, FitError, VvlimitError
from .grid import Grid
from .scenarios import make_initial_data
from .solver import Simulation, State

log = logging.getLogger("vvlimit")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _outdir(args) -> str:
    out = args.outdir or os.environ.get("VVLIMIT_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_text(outdir: str, name: str, text: str) -> str:
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _write_json(outdir: str, name: str, payload: dict) -> str:
    return _write_text(
        outdir, name, json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )


def _json_float(x):
    """Map a value onto something the JSON encoder round-trips exactly."""
    if not isinstance(x, (int, float)):
        return x
    if x is None or math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _base_manifest(cfg: RunConfig, args) -> dict:
    return {
        "config_sha256": cfg.sha256,
        "seed": args.seed,
        "kernel_backend": kernels.backend_name(),
    }


def _mode_label(grid: Grid) -> str:
    return "qualitative" if grid.dim < 3 else "full"


def _initial_state(data) -> State:
    return State(0.0, data.sound.copy(), data.visc.copy(), np.array(data.vel))


# --- subcommands -----------------------------------------------------------------


def cmd_constants(args) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    derived = derive_constants(params, proof_variant=args.proof_variant)
    report = check_conditions(params)
    payload = _base_manifest(cfg, args)
    payload.update(
        {
            "params": {
                "gamma": params.gamma,
                "delta": params.delta,
                "alpha": params.alpha,
                "beta": params.beta,
                "pressure_coeff": params.pressure_coeff,
                "epsilon": params.epsilon,
                "kappa": params.kappa,
            },
            "derived": {k: _json_float(v) for k, v in derived.as_record().items()},
            "conditions": sorted(report.conditions),
            "admissible": report.admissible,
            "p1_feasibility_upper": _json_float(report.m1_upper),
            "proof_variant": args.proof_variant,
        }
    )
    _write_json(_outdir(args), "constants.json", payload)
    for key, val in derived.as_record().items():
        print(f"{key} = {_fmt(val)}")
    print(f"conditions = {{{', '.join(sorted(report.conditions))}}}")
    print(f"admissible = {report.admissible}")
    return 0


def cmd_background(args) -> int:
    cfg = load_config(args.config)
    if not cfg.has_section("background"):
        raise ConfigError("the background command needs a [background] section")
    params = build_params(cfg)
    grid = build_grid(cfg)
    flow = build_flow(cfg, params, grid.dim)
    opts = background_options(cfg)
    points = sample_lattice(
        grid.dim, opts["sample_half_width"], opts["sample_per_axis"]
    )
    times = np.linspace(0.0, opts["t_max"], opts["n_times"])
    lines = [
        "t,"
        + ",".join(f"x{i}" for i in range(grid.dim))
        + ","
        + ",".join(f"u{i}" for i in range(grid.dim))
    ]
    for t in times:
        vals = flow.eval(float(t), points)
        for p, u in zip(points, vals):
            coords = ",".join(_fmt(c) for c in np.atleast_1d(p))
            comps = ",".join(_fmt(c) for c in np.atleast_1d(u))
            lines.append(f"{_fmt(float(t))},{coords},{comps}")
    outdir = _outdir(args)
    _write_text(outdir, "background.csv", "\n".join(lines) + "\n")
    k_bound = flow.k_matrix_bound(opts["t_max"], points, opts["n_times"])
    margin = flow.iv.spectral_margin(points)
    payload = _base_manifest(cfg, args)
    payload.update(
        {
            "dim": grid.dim,
            "t_max": opts["t_max"],
            "n_times": opts["n_times"],
            "n_points": int(points.shape[0]),
            "k_bound": _json_float(k_bound),
            "spectral_margin": _json_float(margin),
            "kappa": params.kappa,
        }
    )
    _write_json(outdir, "background_manifest.json", payload)
    print(f"k_bound = {_fmt(k_bound)}")
    print(f"spectral_margin = {_fmt(margin)}")
    return 0


def _run_simulation(args, inviscid: bool) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    if inviscid:
        params = params.with_epsilon(0.0)
    grid = build_grid(cfg)
    flow = build_flow(cfg, params, grid.dim)
    profile = build_profile(cfg)
    data = make_initial_data(profile, grid, params, truncation_radius(cfg))
    solver_cfg = build_solver_config(cfg)
    opts = solver_run_options(cfg)
    derived = derive_constants(params)

    sim = Simulation(grid, params, flow, solver_cfg)
    recorder = energy.EnergyRecorder(sim, max_order=opts["max_order"])
    sample_times = list(np.linspace(0.0, opts["t_end"], opts["sample_count"]))
    state0 = _initial_state(data)

    outdir = _outdir(args)
    status = "ok"
    blow_time = None
    result = None
    try:
        result = sim.run(
            state0, opts["t_end"], sample_times, dt=opts["dt"], recorder=recorder
        )
    except BlowUpError as exc:
        status = "blowup"
        blow_time = exc.t

    payload = _base_manifest(cfg, args)
    payload.update(
        {
            "command": "euler" if inviscid else "simulate",
            "status": status,
            "blowup_time": _json_float(blow_time),
            "mode": _mode_label(grid),
            "grid": {"dim": grid.dim, "cells": grid.cells, "h": grid.h},
            "epsilon": params.epsilon,
            "stress": solver_cfg.stress,
            "boundary": solver_cfg.boundary,
            "t_end": opts["t_end"],
            "iota": _json_float(derived.iota),
            "initial": {k: _json_float(v) for k, v in data.meta.items()},
        }
    )
    if result is not None:
        payload.update(
            {
                "steps": result.steps,
                "clip_events": result.clip_events,
                "floor_events": result.floor_events,
                "dt_min": _json_float(result.dt_min),
                "dt_max": _json_float(result.dt_max),
            }
        )
    if recorder.rows:
        c0 = recorder.attach_envelope(derived.iota)
        payload["envelope_c0"] = _json_float(c0)
        try:
            slope, constant = energy.fit_decay(recorder.times(), recorder.z_values())
            payload["decay"] = {"slope": slope, "constant": constant}
        except FitError as exc:
            payload["decay"] = None
            log.info("decay fit skipped: %s", exc)
        _write_text(outdir, "energy.csv", recorder.to_csv())
    _write_json(outdir, "run_manifest.json", payload)
    if status == "blowup":
        raise BlowUpError("run blew up", t=blow_time)
    decay = payload.get("decay")
    if decay:
        print(f"decay_slope = {_fmt(decay['slope'])}")
    print(f"steps = {result.steps}, clip_events = {result.clip_events}")
    return 0


def cmd_simulate(args) -> int:
    return _run_simulation(args, inviscid=False)


def cmd_euler(args) -> int:
    return _run_simulation(args, inviscid=True)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    grid = build_grid(cfg)
    flow = build_flow(cfg, params, grid.dim)
    profile = build_profile(cfg)
    data = make_initial_data(profile, grid, params, truncation_radius(cfg))
    solver_cfg = build_solver_config(cfg)
    opts = sweep_options(cfg)
    derived = derive_constants(params)

    result = limit.run_sweep(
        grid,
        params,
        data,
        opts["ladder"],
        opts["t_end"],
        flow=flow,
        config=solver_cfg,
        dt=opts["dt"],
        sample_fractions=opts["sample_fractions"],
        high_reg=opts["high_reg"],
        workers=opts["workers"],
    )
    envelope_error = None
    try:
        limit.attach_envelopes(result, derived.iota)
    except VvlimitError as exc:
        envelope_error = str(exc)
        log.info("envelope fit skipped: %s", exc)

    outdir = _outdir(args)
    _write_text(outdir, "sweep.csv", limit.sweep_csv(result))
    payload = _base_manifest(cfg, args)
    payload.update(limit.sweep_manifest(result))
    payload["mode"] = _mode_label(grid)
    payload["envelope_error"] = envelope_error
    _write_json(outdir, "sweep_manifest.json", payload)
    for order, slope in sorted(result.slopes.items()):
        print(f"slope[{order}] = {_fmt(slope)}")
    if envelope_error is None:
        print(f"c04 = {_fmt(result.c04)}")
    return 0


def cmd_ode(args) -> int:
    cfg = load_config(args.config)
    opts = ode_options(cfg)
    if opts["from_constants"]:
        derived = derive_constants(build_params(cfg))
        p = ode.from_flow_constants(
            derived, c1=opts["c1"], c2=opts["c2"], z0=opts["z0"]
        )
    else:
        p = ode.OdeParams(
            a=opts["a"],
            b=opts["b"],
            c1=opts["c1"],
            d1=opts["d1"],
            c2=opts["c2"],
            d2=opts["d2"],
            z0=opts["z0"],
        )
    lam = ode.threshold(p)
    t_star = ode.blowup_time(p)
    times, values, t_blow = ode.solve_numeric(p, opts["t_end"], opts["dt"])
    closed = ode.solve_closed_form(p, times)
    lines = ["t,closed,numeric"]
    for t, zc, zn in zip(times, closed, values):
        lines.append(f"{_fmt(t)},{_fmt(zc)},{_fmt(zn)}")
    outdir = _outdir(args)
    _write_text(outdir, "ode.csv", "\n".join(lines) + "\n")
    payload = _base_manifest(cfg, args)
    payload.update(
        {
            "params": {
                "a": p.a,
                "b": p.b,
                "c1": p.c1,
                "d1": p.d1,
                "c2": p.c2,
                "d2": p.d2,
                "z0": p.z0,
            },
            "threshold": _json_float(lam),
            "global": bool(p.z0 <= lam),
            "t_star": _json_float(t_star),
            "t_star_numeric": _json_float(t_blow),
            "tail_exponent": _json_float(ode.tail_exponent(p)),
        }
    )
    _write_json(outdir, "ode_manifest.json", payload)
    print(f"threshold = {_fmt(lam)}")
    print(f"global = {p.z0 <= lam}")
    if math.isfinite(t_star):
        print(f"t_star = {_fmt(t_star)}")
    return 0


def cmd_report(args) -> int:
    outdir = _outdir(args)
    artifacts = {}
    for name in sorted(os.listdir(outdir)):
        if not name.endswith(".json") or name == "report.json":
            continue
        path = os.path.join(outdir, name)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                artifacts[name] = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot merge {path!r}: {exc}") from exc
    if not artifacts:
        raise ConfigError(f"no manifests found in {outdir!r}")
    hashes = sorted(
        {a.get("config_sha256") for a in artifacts.values() if "config_sha256" in a}
    )
    payload = {"artifacts": artifacts, "config_hashes": hashes}
    _write_json(outdir, "report.json", payload)
    print(f"merged {len(artifacts)} manifests")
    return 0


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vvlimit",
        description=(
            "Numerical laboratory for degenerate-viscosity compressible flow: "
            "decay diagnostics, vanishing-viscosity sweeps, comparison ODE."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool = True):
        if needs_config:
            p.add_argument("-c", "--config", required=True, help="run config file")
        p.add_argument("-o", "--outdir", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="sampling seed (recorded)")
        p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("constants", help="derived constants and admissibility")
    common(p)
    p.add_argument(
        "--proof-variant",
        action="store_true",
        help="use the tighter step-level caps instead of statement-level",
    )
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("background", help="sample the background flow")
    common(p)
    p.set_defaults(func=cmd_background)

    p = sub.add_parser("simulate", help="viscous run with energy diagnostics")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("euler", help="inviscid run with energy diagnostics")
    common(p)
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("sweep", help="viscosity ladder convergence study")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ode", help="comparison equation threshold and solution")
    common(p)
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("report", help="merge manifests in the output directory")
    common(p, needs_config=False)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VvlimitError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
