"""Viscosity ladder sweeps and the Gronwall-type difference envelopes.

A sweep integrates the same initial data once with the inviscid path and
once per ladder entry with the viscous path, on one shared grid, scheme
and fixed time step, so the leading discretization error cancels in the
difference

    Wbar = (sound_eps - sound_0, vel_eps - vel_0)

and the viscosity rate becomes observable at coarse resolution. Ladder
entries that blow up or lose the step-size guard are flagged and
excluded; fits need at least three survivors.

The envelope formulas bound the squared difference norms by

    L2:  (1+t)^C ( |Wbar0|_2^2   + C eps^2 gap(7 - 4 iota, t) )
    D1:  (1+t)^C ( |Wbar0|_D1^2  + C eps^2 gap(5 - 4 iota, t) )
    D2:  pre(t) ( |Wbar0|_D2^2
                  + C |Wbar0|_D1^2 int_0^t (1+s)^(1-4 iota+C) ds
                  + C eps int_0^t (1+s)^(1-4 iota+C) gap(5-4 iota, s) ds )

with pre(t) = exp(C ((1+t)^(3-2 iota) - 1)) for iota in (1, 3/2) and
(1+t)^C for iota in [3/2, 2). gap(r, t) = ((1+t)^r - 1)/r is the
normalized power gap whose r -> 0 limit is ln(1+t), which makes every
branch continuous across the iota = 7/4 and iota = 5/4 splits; the
normalization and the additive epsilon constants of the raw estimates
are absorbed into the single fitted constant C so that the envelopes
reduce exactly to the initial squared norms at t = 0. All envelope
integrals are elementary and evaluated in closed form.

C is fitted by bisection on the smallest surviving ladder entry and then
checked as an upper bound for the rest of the ladder with the viscosity
inflated by the ladder ratio, which covers the gap between the
second-order display (first order in eps) and same-scheme measured
differences (up to second order in eps when squared).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import ModelParameters
from .energy import field_norm_sq
from .errors import FitError, PreconditionError
from .grid import Grid
from .ode import power_integral
from .scenarios import InitialData
from .solver import BlowUpError, Simulation, SolverConfig, State

C04_MAX = 1e6
DEFAULT_SAMPLE_FRACTIONS = (0.25, 0.5, 1.0)
SWEEP_CSV_HEADER = "eps,t,l2,d1,d2"


# --- envelope formulas -----------------------------------------------------------


def power_gap(r: float, t):
    """((1+t)^r - 1)/r, continued by ln(1+t) at r = 0."""
    t = np.asarray(t, dtype=float)
    if r == 0.0:
        out = np.log1p(t)
    else:
        out = np.expm1(r * np.log1p(t)) / r
    return float(out) if out.ndim == 0 else out


def log_power_integral(p: float, t):
    """int_0^t (1+s)^p ln(1+s) ds in closed form."""
    t = np.asarray(t, dtype=float)
    lt = np.log1p(t)
    if p == -1.0:
        out = 0.5 * lt * lt
    else:
        q = p + 1.0
        out = (np.exp(q * lt) * (q * lt - 1.0) + 1.0) / (q * q)
    return float(out) if out.ndim == 0 else out


def gap_power_integral(p: float, r: float, t):
    """int_0^t (1+s)^p gap(r, s) ds in closed form."""
    if r == 0.0:
        return log_power_integral(p, t)
    t = np.asarray(t, dtype=float)
    out = np.asarray(power_integral(p + r, t) - power_integral(p, t)) / r
    return float(out) if out.ndim == 0 else out


def _require_iota(iota: float) -> None:
    if not 1.0 < iota < 2.0:
        raise PreconditionError(f"decay exponent must lie in (1, 2), got iota={iota}")


def envelope_l2_sq(w0_l2: float, iota: float, c04: float, eps: float, t):
    _require_iota(iota)
    t = np.asarray(t, dtype=float)
    out = (1.0 + t) ** c04 * (
        w0_l2**2 + c04 * eps**2 * power_gap(7.0 - 4.0 * iota, t)
    )
    return float(out) if out.ndim == 0 else out


def envelope_d1_sq(w0_d1: float, iota: float, c04: float, eps: float, t):
    _require_iota(iota)
    t = np.asarray(t, dtype=float)
    out = (1.0 + t) ** c04 * (
        w0_d1**2 + c04 * eps**2 * power_gap(5.0 - 4.0 * iota, t)
    )
    return float(out) if out.ndim == 0 else out


def envelope_d2_sq(
    w0_d1: float, w0_d2: float, iota: float, c04: float, eps: float, t
):
    _require_iota(iota)
    t = np.asarray(t, dtype=float)
    p = 1.0 - 4.0 * iota + c04
    bracket = (
        w0_d2**2
        + c04 * w0_d1**2 * power_integral(p, t)
        + c04 * eps * gap_power_integral(p, 5.0 - 4.0 * iota, t)
    )
    if iota < 1.5:
        pre = np.exp(c04 * (np.expm1((3.0 - 2.0 * iota) * np.log1p(t))))
    else:
        pre = (1.0 + t) ** c04
    out = pre * bracket
    return float(out) if out.ndim == 0 else out


def gronwall_envelope(
    w0_norms: tuple[float, float, float],
    iota: float,
    c04: float,
    eps: float,
    t,
) -> dict[str, np.ndarray]:
    """Squared-norm envelopes for L2, D1 and D2 at the given times.

    w0_norms holds the (unsquared) initial difference norms in the same
    three orders.
    """
    w0_l2, w0_d1, w0_d2 = w0_norms
    return {
        "l2": envelope_l2_sq(w0_l2, iota, c04, eps, t),
        "d1": envelope_d1_sq(w0_d1, iota, c04, eps, t),
        "d2": envelope_d2_sq(w0_d1, w0_d2, iota, c04, eps, t),
    }


# --- sweeps ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    eps: float
    status: str  # "ok", "blowup" or "cfl"
    times: np.ndarray
    norms: dict[str, np.ndarray]  # per order, aligned with times

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sup_norm(self, order: str) -> float:
        return float(np.max(self.norms[order]))


@dataclass
class SweepResult:
    ladder: list[float]
    entries: list[SweepEntry]
    slopes: dict[str, float] = field(default_factory=dict)
    intercepts: dict[str, float] = field(default_factory=dict)
    w0_norms: tuple[float, float, float] = (0.0, 0.0, 0.0)
    iota: float = 0.0
    c04: float = 0.0
    eps_margin: float = 1.0
    envelope_ok: dict[float, bool] = field(default_factory=dict)
    dt: float = 0.0
    orders: tuple[str, ...] = ("l2", "d1", "d2")

    def survivors(self) -> list[SweepEntry]:
        return [e for e in self.entries if e.ok]


def difference_norms(
    viscous: State, inviscid: State, grid: Grid, exclude_boundary: bool
) -> dict[str, float]:
    """Squared-root norms of the state difference, by derivative order."""
    fields = [viscous.sound - inviscid.sound] + [
        viscous.vel[i] - inviscid.vel[i] for i in range(grid.dim)
    ]
    return {
        label: math.sqrt(field_norm_sq(fields, k, grid, exclude_boundary))
        for k, label in enumerate(("l2", "d1", "d2", "d3"))
    }


def _entry_norm_table(
    pairs: list[tuple[State, State]],
    grid: Grid,
    exclude_boundary: bool,
    orders: tuple[str, ...],
) -> dict[str, np.ndarray]:
    rows = [
        difference_norms(v, e, grid, exclude_boundary) for v, e in pairs
    ]
    return {o: np.array([r[o] for r in rows]) for o in orders}


def _shared_dt(
    grid: Grid,
    params: ModelParameters,
    initial: State,
    ladder: list[float],
    flow,
    config: SolverConfig,
    t_end: float,
) -> float:
    # an adaptive inviscid pre-run samples the advective limit over the
    # whole horizon; the initial per-eps limits cover the diffusive one
    sim0 = Simulation(grid, params.with_epsilon(0.0), flow, config)
    pre = sim0.run(initial, t_end)
    dt = min((lim for _, _, lim in pre.cfl_history), default=math.inf)
    dt = min(dt, sim0.cfl_limit(initial))
    for eps in ladder:
        sim = Simulation(grid, params.with_epsilon(eps), flow, config)
        dt = min(dt, sim.cfl_limit(initial))
    return 0.8 * dt


def run_sweep(
    grid: Grid,
    params: ModelParameters,
    initial: InitialData,
    ladder: list[float],
    t_end: float,
    flow=None,
    config: SolverConfig | None = None,
    dt: float | None = None,
    sample_fractions: tuple[float, ...] = DEFAULT_SAMPLE_FRACTIONS,
    high_reg: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Run the ladder against a single shared inviscid reference.

    Every run shares grid, scheme, initial data and the fixed time step
    (half the tightest initial CFL limit over the ladder unless given).
    Entries may include 0, which reproduces the reference bitwise and is
    excluded from fits along with flagged failures.
    """
    if len(ladder) < 3:
        raise PreconditionError(f"ladder needs at least 3 entries, got {len(ladder)}")
    if any(e < 0.0 for e in ladder):
        raise PreconditionError("ladder entries must be nonnegative")
    if t_end <= 0.0:
        raise PreconditionError(f"final time must be positive, got {t_end}")
    config = config or SolverConfig()
    ladder = sorted(ladder, reverse=True)
    orders = ("l2", "d1", "d2", "d3") if high_reg else ("l2", "d1", "d2")
    sample_times = sorted(f * t_end for f in sample_fractions)

    state0 = State(
        0.0, initial.sound.copy(), initial.visc.copy(), np.array(initial.vel)
    )
    if dt is None:
        dt = _shared_dt(
            grid, params, state0, [e for e in ladder if e > 0], flow, config, t_end
        )
    exclude = config.boundary == "support"

    euler_sim = Simulation(grid, params.with_epsilon(0.0), flow, config)
    euler_run = euler_sim.run(state0, t_end, sample_times, dt=dt)
    euler_states = {round(t, 12): s for t, s in euler_run.samples}

    def run_entry(eps: float) -> SweepEntry:
        sim = Simulation(grid, params.with_epsilon(eps), flow, config)
        try:
            res = sim.run(state0, t_end, sample_times, dt=dt)
        except BlowUpError:
            return SweepEntry(eps, "blowup", np.array([]), {o: np.array([]) for o in orders})
        except PreconditionError:
            return SweepEntry(eps, "cfl", np.array([]), {o: np.array([]) for o in orders})
        pairs = []
        times = []
        for t, s in res.samples:
            key = round(t, 12)
            if key in euler_states:
                pairs.append((s, euler_states[key]))
                times.append(t)
        table = _entry_norm_table(pairs, grid, exclude, orders)
        return SweepEntry(eps, "ok", np.array(times), table)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run_entry, ladder))
    else:
        entries = [run_entry(e) for e in ladder]

    result = SweepResult(
        ladder=list(ladder), entries=entries, dt=dt, orders=orders
    )
    result.w0_norms = tuple(
        difference_norms(state0, state0, grid, exclude)[o]
        for o in ("l2", "d1", "d2")
    )
    fit_slopes(result)
    return result


def fit_slopes(result: SweepResult) -> None:
    """Least-squares slopes of log sup-norm against log eps, per order.

    The h1 entry fits the combined (l2^2 + d1^2)^(1/2) norm targeted by
    the first-order rate.
    """
    usable = [e for e in result.survivors() if e.eps > 0.0]
    if len(usable) < 3:
        raise FitError(f"need at least 3 surviving ladder entries, got {len(usable)}")
    sups: dict[str, np.ndarray] = {
        o: np.array([e.sup_norm(o) for e in usable]) for o in result.orders
    }
    sups["h1"] = np.array(
        [
            max(
                math.hypot(l2, d1)
                for l2, d1 in zip(e.norms["l2"], e.norms["d1"])
            )
            for e in usable
        ]
    )
    eps = np.array([e.eps for e in usable])
    for order, vals in sups.items():
        mask = vals > 0.0
        if int(mask.sum()) < 3:
            raise FitError(f"fewer than 3 positive {order} norms to fit")
        slope, intercept = np.polyfit(np.log(eps[mask]), np.log(vals[mask]), 1)
        result.slopes[order] = float(slope)
        result.intercepts[order] = float(math.exp(intercept))


def _envelope_holds(
    entry: SweepEntry,
    w0_norms: tuple[float, float, float],
    iota: float,
    c04: float,
    eps_scale: float = 1.0,
    rtol: float = 1e-9,
) -> bool:
    env = gronwall_envelope(w0_norms, iota, c04, eps_scale * entry.eps, entry.times)
    for order in ("l2", "d1", "d2"):
        measured_sq = entry.norms[order] ** 2
        if np.any(measured_sq > np.asarray(env[order]) * (1.0 + rtol)):
            return False
    return True


def ladder_ratio(result: SweepResult) -> float:
    """Ratio of the largest to the smallest surviving positive viscosity."""
    eps = [e.eps for e in result.survivors() if e.eps > 0.0]
    if not eps:
        raise FitError("no surviving ladder entries")
    return max(eps) / min(eps)


def fit_c04(result: SweepResult, iota: float) -> float:
    """Smallest constant closing the envelopes on the smallest-eps entry.

    The envelopes are monotone increasing in the constant, so bisection
    applies; the result is meant to be checked as an upper bound on the
    rest of the ladder via ``check_envelopes``.
    """
    _require_iota(iota)
    usable = [e for e in result.survivors() if e.eps > 0.0]
    if not usable:
        raise FitError("no surviving ladder entries to fit the envelope constant")
    target = min(usable, key=lambda e: e.eps)
    lo, hi = 0.0, 1.0
    while not _envelope_holds(target, result.w0_norms, iota, hi):
        lo, hi = hi, 2.0 * hi
        if hi > C04_MAX:
            raise FitError("envelope constant diverged during fitting")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _envelope_holds(target, result.w0_norms, iota, mid):
            hi = mid
        else:
            lo = mid
    return hi


def check_envelopes(
    result: SweepResult, iota: float, c04: float, eps_margin: float | None = None
) -> dict[float, bool]:
    """Envelope upper-bound verdict for every surviving positive entry.

    The verdicts are computed with the viscosity inflated by ``eps_margin``
    (default: the ladder ratio max eps / min eps).  The second-order display
    is first order in eps while same-scheme measured differences can be as
    steep as first order in eps in norm, i.e. second order squared, so a
    constant fitted to touch at the smallest viscosity stays an upper bound
    across the whole ladder exactly when the check is run at eps multiplied
    by the ladder ratio.  The margin keeps the t = 0 identity intact since
    every eps term vanishes there.
    """
    if eps_margin is None:
        eps_margin = ladder_ratio(result)
    out = {}
    for entry in result.survivors():
        if entry.eps > 0.0:
            out[entry.eps] = _envelope_holds(
                entry, result.w0_norms, iota, c04, eps_scale=eps_margin
            )
    return out


def attach_envelopes(
    result: SweepResult, iota: float, eps_margin: float | None = None
) -> None:
    """Fit the constant, record it and the per-entry verdicts in place."""
    result.iota = iota
    result.c04 = fit_c04(result, iota)
    result.eps_margin = eps_margin if eps_margin is not None else ladder_ratio(result)
    result.envelope_ok = check_envelopes(result, iota, result.c04, result.eps_margin)


# --- serialization ---------------------------------------------------------------


def sweep_csv(result: SweepResult) -> str:
    header = "eps,t," + ",".join(result.orders)
    lines = [header]
    for entry in result.entries:
        if not entry.ok:
            continue
        for i, t in enumerate(entry.times):
            vals = ",".join(f"{entry.norms[o][i]:.17g}" for o in result.orders)
            lines.append(f"{entry.eps:.17g},{t:.17g},{vals}")
    return "\n".join(lines) + "\n"


def sweep_manifest(result: SweepResult) -> dict:
    return {
        "ladder": [float(e) for e in result.ladder],
        "dt": result.dt,
        "orders": list(result.orders),
        "entries": [
            {
                "eps": entry.eps,
                "status": entry.status,
                "sup_norms": {o: entry.sup_norm(o) for o in result.orders}
                if entry.ok
                else {},
            }
            for entry in result.entries
        ],
        "slopes": dict(result.slopes),
        "intercepts": dict(result.intercepts),
        "w0_norms": list(result.w0_norms),
        "iota": result.iota,
        "c04": result.c04,
        "envelope_eps_margin": result.eps_margin,
        "envelope_ok": {f"{k:.17g}": v for k, v in result.envelope_ok.items()},
    }
