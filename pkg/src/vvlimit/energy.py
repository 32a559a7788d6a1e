"""Time-weighted energy norms, decay fitting and run recording.

The decay diagnostics track, for the state W = (sound, vel) and the
viscosity weight:

    Y_k = |grad^k W|_2          k = 0..3
    U_k = Theta(k) |grad^k visc|_2,   Theta(k) = 1 (k<3), sqrt(eps) (k=3)

    Z^2 = sum_k (1+t)^(2(k-2.5)) Y_k^2 + sum_k (1+t)^(2(k-3)) U_k^2

k-th derivatives are realized as k repeated centered first differences,
summed over all derivative directions with multinomial multiplicity. In
the truncated-support boundary mode cells whose stencil would wrap
around the box faces are excluded from the sums; the support margin
keeps the excluded cells at zero anyway. The weight exponents are kept
at their three-dimensional values in lower-dimensional runs, which the
run manifests label qualitative mode.

The decay rate is fitted by least squares of log Z against log(1+t).
The dissipation column accumulates

    eps * sum_k (1+s)^(2(k-2.5)) |visc * grad^(k+1) vel|_2^2

as a left-endpoint Riemann sum over the accepted steps, so it is
nondecreasing by construction.
"""
from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np

from . import kernels
from .errors import FitError
from .grid import Grid
from .solver import Simulation, State

WEIGHT_N = 2.5
WEIGHT_M = 3.0

CSV_HEADER = "t,Y0,Y1,Y2,Y3,U0,U1,U2,U3,Z,dissipation,envelope"


def theta(k: int, eps: float) -> float:
    return 1.0 if k < 3 else math.sqrt(eps)


def state_weight_exponent(k: int) -> float:
    return k - WEIGHT_N


def visc_weight_exponent(k: int) -> float:
    return k - WEIGHT_M


def _multiplicity(combo: tuple[int, ...]) -> int:
    out = math.factorial(len(combo))
    for axis in set(combo):
        out //= math.factorial(combo.count(axis))
    return out


def _interior(shape: tuple[int, ...], k: int):
    return tuple(slice(k, n - k) for n in shape)


def grad_norm_sq(
    f: np.ndarray, k: int, grid: Grid, exclude_boundary: bool = False
) -> float:
    """Squared L2 norm of the full k-th derivative tensor of a scalar field."""
    if k == 0:
        region = _interior(grid.shape, 0)
        return grid.cell_volume * float(np.sum(f[region] * f[region]))
    if exclude_boundary and grid.cells <= 2 * k:
        raise FitError(f"grid too small to exclude {k} boundary layers")
    total = 0.0
    region = _interior(grid.shape, k if exclude_boundary else 0)
    for combo in combinations_with_replacement(range(grid.dim), k):
        df = f
        for axis in combo:
            df = kernels.diff1(df, axis, grid.h)
        part = df[region]
        total += _multiplicity(combo) * float(np.sum(part * part))
    return grid.cell_volume * total


def field_norm_sq(
    fields: list[np.ndarray], k: int, grid: Grid, exclude_boundary: bool = False
) -> float:
    return sum(grad_norm_sq(f, k, grid, exclude_boundary) for f in fields)


def compute_norms(
    state: State,
    grid: Grid,
    eps: float,
    exclude_boundary: bool = False,
    max_order: int = 3,
) -> dict[str, float]:
    """All Y_k, U_k and the weighted aggregate Z at the state's time."""
    w_fields = [state.sound] + [state.vel[i] for i in range(grid.dim)]
    out: dict[str, float] = {"t": state.t}
    z2 = 0.0
    for k in range(max_order + 1):
        yk = math.sqrt(field_norm_sq(w_fields, k, grid, exclude_boundary))
        uk = theta(k, eps) * math.sqrt(
            grad_norm_sq(state.visc, k, grid, exclude_boundary)
        )
        out[f"Y{k}"] = yk
        out[f"U{k}"] = uk
        z2 += (1.0 + state.t) ** (2.0 * state_weight_exponent(k)) * yk * yk
        z2 += (1.0 + state.t) ** (2.0 * visc_weight_exponent(k)) * uk * uk
    out["Z"] = math.sqrt(z2)
    return out


class EnergyRecorder:
    """Collects norm rows at sample times and accumulates dissipation."""

    def __init__(self, sim: Simulation, max_order: int = 3):
        self.sim = sim
        self.max_order = max_order
        self.exclude_boundary = sim.config.boundary == "support"
        self.rows: list[dict[str, float]] = []
        self.dissipation = 0.0

    def _dissipation_rate(self, state: State) -> float:
        eps = self.sim.params.epsilon
        if eps == 0.0:
            return 0.0
        g = self.sim.grid
        rate = 0.0
        for k in range(self.max_order + 1):
            # |visc * grad^(k+1) vel|_2^2 assembled per derivative direction
            total = 0.0
            for combo in combinations_with_replacement(range(g.dim), k + 1):
                mult = _multiplicity(combo)
                for i in range(g.dim):
                    df = state.vel[i]
                    for axis in combo:
                        df = kernels.diff1(df, axis, g.h)
                    prod = state.visc * df
                    if self.exclude_boundary:
                        prod = prod[_interior(g.shape, k + 1)]
                    total += mult * float(np.sum(prod * prod))
            rate += (1.0 + state.t) ** (
                2.0 * state_weight_exponent(k)
            ) * g.cell_volume * total
        return eps * rate

    def on_step(self, state_before: State, dt: float) -> None:
        self.dissipation += dt * self._dissipation_rate(state_before)

    def on_sample(self, state: State) -> None:
        row = compute_norms(
            state,
            self.sim.grid,
            self.sim.params.epsilon,
            self.exclude_boundary,
            self.max_order,
        )
        row["dissipation"] = self.dissipation
        self.rows.append(row)

    def times(self) -> np.ndarray:
        return np.array([r["t"] for r in self.rows])

    def z_values(self) -> np.ndarray:
        return np.array([r["Z"] for r in self.rows])

    def attach_envelope(self, iota: float) -> float:
        """Add the envelope column C0 (1+t)^(-iota) with the tight C0."""
        c0 = weighted_sup(self.times(), self.z_values(), iota)
        for r in self.rows:
            r["envelope"] = c0 * (1.0 + r["t"]) ** (-iota)
        return c0

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        cols = CSV_HEADER.split(",")
        for r in self.rows:
            lines.append(",".join(f"{r.get(c, 0.0):.17g}" for c in cols))
        return "\n".join(lines) + "\n"


def fit_decay(times: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """Least squares slope and constant of log Z against log(1+t).

    Returns (slope, constant) with Z ~ constant * (1+t)^slope. Requires
    at least five usable samples (finite positive Z).
    """
    times = np.asarray(times, dtype=float)
    z = np.asarray(z, dtype=float)
    mask = np.isfinite(z) & (z > 0.0) & np.isfinite(times)
    if int(mask.sum()) < 5:
        raise FitError(f"need at least 5 positive samples to fit, got {int(mask.sum())}")
    x = np.log1p(times[mask])
    y = np.log(z[mask])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(math.exp(intercept))


def weighted_sup(times: np.ndarray, z: np.ndarray, iota: float) -> float:
    """sup over samples of (1+t)^iota * Z(t)."""
    times = np.asarray(times, dtype=float)
    z = np.asarray(z, dtype=float)
    return float(((1.0 + times) ** iota * z).max())
