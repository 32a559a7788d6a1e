"""Sectioned key-value run configuration: parsing, hashing, typed builders.

A run config is an INI-style file whose sections feed the individual
modules. The in-memory record is a plain nested mapping of strings; a
parse -> serialize -> parse round trip reproduces the record exactly
(keys are case-normalized on the way in). The config hash is the
sha256 of the canonical serialization (sorted sections and keys), so
comments and ordering do not affect artifact identity.

Sections and keys (defaults in parentheses):

  [model]      gamma, delta, alpha, beta, pressure_coeff (1), epsilon (1),
               kappa (1)
  [grid]       dim (1), cells (256), lo (-1), hi (1)
  [background] matrix ("identity" or d*d row-major numbers), shift (0),
               perturb (none), amplitude (0), check (true),
               sample_half_width (3), sample_per_axis (5), t_max (10),
               n_times (9)
  [scenario]   kind (gaussian), amplitude (0.05), sigma (0),
               support_radius (1), truncation_radius (optional)
  [solver]     boundary (support), stress (full), hyper_coeff (0),
               collar (4), cfl_safety (0.4), support_tol (1e-14),
               vacuum_floor (0, disabled), t_end (1), dt (adaptive),
               sample_count (17), max_order (3)
  [sweep]      ladder (explicit list) or eps_max/ratio/count geometric,
               t_end (0.5), sample_fractions (0.25 0.5 1.0),
               high_reg (false), workers (1)
  [ode]        a (3), b, c1, d1, c2 (0), d2 (0), z0 (1), t_end (4),
               dt (1e-3), from_constants (false), c04_scale -> via c1

The [background] section is optional; without it runs use a zero
background velocity.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .background import PERTURB_KINDS, BackgroundFlow, InitialVelocity
from .constants import ModelParameters
from .errors import ConfigError
from .grid import Grid
from .scenarios import PROFILE_KINDS, DensityProfile
from .solver import SolverConfig


@dataclass(frozen=True)
class RunConfig:
    sections: dict[str, dict[str, str]]
    path: str = ""
    sha256: str = field(default="", compare=False)

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def has_section(self, name: str) -> bool:
        return name in self.sections


def _record_from_parser(parser: configparser.ConfigParser) -> dict[str, dict[str, str]]:
    return {
        name: {k: v.strip() for k, v in parser[name].items()}
        for name in parser.sections()
    }


def parse_config(text: str, path: str = "") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections = _record_from_parser(parser)
    cfg = RunConfig(sections=sections, path=path)
    return RunConfig(sections=sections, path=path, sha256=config_hash(cfg))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text, path=path)


def dumps_config(cfg: RunConfig) -> str:
    """Canonical serialization: sorted sections, sorted keys."""
    out = io.StringIO()
    for name in sorted(cfg.sections):
        out.write(f"[{name}]\n")
        for key in sorted(cfg.sections[name]):
            out.write(f"{key} = {cfg.sections[name][key]}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dumps_config(cfg).encode("utf-8")).hexdigest()


# --- typed getters ---------------------------------------------------------------

_MISSING = object()


def _get(sec: dict[str, str], section: str, key: str, default=_MISSING) -> str:
    if key in sec:
        return sec[key]
    if default is _MISSING:
        raise ConfigError(f"missing required key {key!r} in section [{section}]")
    return default


def get_float(sec: dict[str, str], section: str, key: str, default=_MISSING) -> float:
    raw = _get(sec, section, key, default)
    if isinstance(raw, (int, float)) or raw is None:
        return raw
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc


def get_int(sec: dict[str, str], section: str, key: str, default=_MISSING) -> int:
    raw = _get(sec, section, key, default)
    if isinstance(raw, int) or raw is None:
        return raw
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from exc


def get_bool(sec: dict[str, str], section: str, key: str, default=_MISSING) -> bool:
    raw = _get(sec, section, key, default)
    if isinstance(raw, bool):
        return raw
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")


def get_floats(sec: dict[str, str], section: str, key: str, default=_MISSING) -> list[float]:
    raw = _get(sec, section, key, default)
    if not isinstance(raw, str):
        return raw
    parts = raw.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number list") from exc


# --- builders --------------------------------------------------------------------


def build_params(cfg: RunConfig) -> ModelParameters:
    sec = cfg.section("model")
    if not sec:
        raise ConfigError("config needs a [model] section")
    return ModelParameters(
        gamma=get_float(sec, "model", "gamma"),
        delta=get_float(sec, "model", "delta"),
        alpha=get_float(sec, "model", "alpha"),
        beta=get_float(sec, "model", "beta"),
        pressure_coeff=get_float(sec, "model", "pressure_coeff", 1.0),
        epsilon=get_float(sec, "model", "epsilon", 1.0),
        kappa=get_float(sec, "model", "kappa", 1.0),
    )


def build_grid(cfg: RunConfig) -> Grid:
    sec = cfg.section("grid")
    return Grid(
        dim=get_int(sec, "grid", "dim", 1),
        cells=get_int(sec, "grid", "cells", 256),
        lo=get_float(sec, "grid", "lo", -1.0),
        hi=get_float(sec, "grid", "hi", 1.0),
    )


def build_initial_velocity(cfg: RunConfig, dim: int) -> InitialVelocity | None:
    if not cfg.has_section("background"):
        return None
    sec = cfg.section("background")
    raw = _get(sec, "background", "matrix", "identity").strip().lower()
    if raw == "identity":
        matrix = np.eye(dim)
    elif raw == "zero":
        matrix = np.zeros((dim, dim))
    else:
        entries = get_floats(sec, "background", "matrix")
        if len(entries) == 1:
            matrix = entries[0] * np.eye(dim)
        elif len(entries) == dim * dim:
            matrix = np.array(entries).reshape(dim, dim)
        else:
            raise ConfigError(
                f"[background] matrix needs 1 or {dim * dim} entries, got {len(entries)}"
            )
    shift = get_floats(sec, "background", "shift", None)
    if shift is not None and len(shift) != dim:
        raise ConfigError(f"[background] shift needs {dim} entries, got {len(shift)}")
    perturb = _get(sec, "background", "perturb", "none")
    if perturb not in PERTURB_KINDS:
        raise ConfigError(
            f"[background] perturb = {perturb!r}; choose from {PERTURB_KINDS}"
        )
    return InitialVelocity(
        dim=dim,
        matrix=matrix,
        shift=None if shift is None else np.array(shift),
        perturb=perturb,
        amplitude=get_float(sec, "background", "amplitude", 0.0),
    )


def build_flow(cfg: RunConfig, params: ModelParameters, dim: int) -> BackgroundFlow | None:
    iv = build_initial_velocity(cfg, dim)
    if iv is None:
        return None
    sec = cfg.section("background")
    return BackgroundFlow(
        iv,
        kappa=params.kappa,
        check=get_bool(sec, "background", "check", True),
        sample_half_width=get_float(sec, "background", "sample_half_width", 3.0),
        sample_per_axis=get_int(sec, "background", "sample_per_axis", 5),
    )


def build_profile(cfg: RunConfig) -> DensityProfile:
    sec = cfg.section("scenario")
    kind = _get(sec, "scenario", "kind", "gaussian")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"[scenario] kind = {kind!r}; choose from {PROFILE_KINDS}")
    return DensityProfile(
        kind=kind,
        amplitude=get_float(sec, "scenario", "amplitude", 0.05),
        sigma=get_float(sec, "scenario", "sigma", 0.0),
        support_radius=get_float(sec, "scenario", "support_radius", 1.0),
    )


def truncation_radius(cfg: RunConfig) -> float | None:
    sec = cfg.section("scenario")
    return get_float(sec, "scenario", "truncation_radius", None)


def build_solver_config(cfg: RunConfig) -> SolverConfig:
    sec = cfg.section("solver")
    return SolverConfig(
        boundary=_get(sec, "solver", "boundary", "support"),
        stress=_get(sec, "solver", "stress", "full"),
        hyper_coeff=get_float(sec, "solver", "hyper_coeff", 0.0),
        collar=get_int(sec, "solver", "collar", 4),
        cfl_safety=get_float(sec, "solver", "cfl_safety", 0.4),
        support_tol=get_float(sec, "solver", "support_tol", 1e-14),
        vacuum_floor=get_float(sec, "solver", "vacuum_floor", 0.0),
    )


def solver_run_options(cfg: RunConfig) -> dict:
    sec = cfg.section("solver")
    return {
        "t_end": get_float(sec, "solver", "t_end", 1.0),
        "dt": get_float(sec, "solver", "dt", None),
        "sample_count": get_int(sec, "solver", "sample_count", 17),
        "max_order": get_int(sec, "solver", "max_order", 3),
    }


def sweep_options(cfg: RunConfig) -> dict:
    sec = cfg.section("sweep")
    if "ladder" in sec:
        ladder = get_floats(sec, "sweep", "ladder")
    else:
        eps_max = get_float(sec, "sweep", "eps_max", 1e-2)
        ratio = get_float(sec, "sweep", "ratio", 0.5)
        count = get_int(sec, "sweep", "count", 4)
        if not 0.0 < ratio < 1.0:
            raise ConfigError(f"[sweep] ratio must be in (0, 1), got {ratio}")
        ladder = [eps_max * ratio**i for i in range(count)]
    if not ladder:
        raise ConfigError("[sweep] ladder is empty")
    return {
        "ladder": ladder,
        "t_end": get_float(sec, "sweep", "t_end", 0.5),
        "sample_fractions": tuple(
            get_floats(sec, "sweep", "sample_fractions", [0.25, 0.5, 1.0])
        ),
        "high_reg": get_bool(sec, "sweep", "high_reg", False),
        "workers": get_int(sec, "sweep", "workers", 1),
        "dt": get_float(sec, "sweep", "dt", None),
    }


def ode_options(cfg: RunConfig) -> dict:
    sec = cfg.section("ode")
    return {
        "a": get_float(sec, "ode", "a", 3.0),
        "b": get_float(sec, "ode", "b", 2.0),
        "c1": get_float(sec, "ode", "c1", 0.0),
        "d1": get_float(sec, "ode", "d1", 0.0),
        "c2": get_float(sec, "ode", "c2", 0.0),
        "d2": get_float(sec, "ode", "d2", 0.0),
        "z0": get_float(sec, "ode", "z0", 1.0),
        "t_end": get_float(sec, "ode", "t_end", 4.0),
        "dt": get_float(sec, "ode", "dt", 1e-3),
        "from_constants": get_bool(sec, "ode", "from_constants", False),
    }


def background_options(cfg: RunConfig) -> dict:
    sec = cfg.section("background")
    return {
        "t_max": get_float(sec, "background", "t_max", 10.0),
        "n_times": get_int(sec, "background", "n_times", 9),
        "sample_half_width": get_float(sec, "background", "sample_half_width", 3.0),
        "sample_per_axis": get_int(sec, "background", "sample_per_axis", 5),
    }
