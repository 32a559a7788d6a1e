"""Acceptance gate: one test, hence one pass/fail line, per headline claim.

Run ``pytest -v tests/test_acceptance.py`` to see the per-criterion
verdicts. The criteria mirror the shipped run configs where one exists
(decay_1d, coarse_3d, sweep_1d), so a green gate means the documented
pipelines reproduce the advertised numbers at desk scale. Expensive
runs are module-scoped fixtures shared across criteria; the whole gate
takes on the order of ten seconds.
"""
import math
import os

import numpy as np
import pytest

from test_solver import oracle_rhs, run_periodic, trig_state

from vvlimit import energy, limit, ode
from vvlimit.background import BackgroundFlow, InitialVelocity
from vvlimit.config import (
    build_flow,
    build_grid,
    build_params,
    build_profile,
    build_solver_config,
    load_config,
    solver_run_options,
    sweep_options,
    truncation_radius,
)
from vvlimit.constants import ModelParameters, check_conditions, derive_constants
from vvlimit.grid import Grid
from vvlimit.scenarios import DensityProfile, make_initial_data
from vvlimit.solver import Simulation, SolverConfig, State, stress_form

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
REL = 1e-12


def load_shipped(name):
    return load_config(os.path.join(CONFIG_DIR, name))


def decay_run(cfg, cells):
    """One decay pipeline run at the given resolution; returns (times, Z)."""
    params = build_params(cfg)
    base = build_grid(cfg)
    grid = Grid(dim=base.dim, cells=cells, lo=base.lo, hi=base.hi)
    flow = build_flow(cfg, params, grid.dim)
    data = make_initial_data(build_profile(cfg), grid, params, truncation_radius(cfg))
    opts = solver_run_options(cfg)
    sim = Simulation(grid, params, flow, build_solver_config(cfg))
    recorder = energy.EnergyRecorder(sim, max_order=opts["max_order"])
    state = State(0.0, data.sound.copy(), data.visc.copy(), np.array(data.vel))
    samples = list(np.linspace(0.0, opts["t_end"], opts["sample_count"]))
    sim.run(state, opts["t_end"], samples, dt=opts["dt"], recorder=recorder)
    return recorder.times(), recorder.z_values()


@pytest.fixture(scope="module")
def decay_1d():
    cfg = load_shipped("decay_1d.ini")
    return {cells: decay_run(cfg, cells) for cells in (512, 1024)}


@pytest.fixture(scope="module")
def coarse_3d():
    return decay_run(load_shipped("coarse_3d.ini"), 32)


def sweep_shipped(workers=None):
    cfg = load_shipped("sweep_1d.ini")
    params = build_params(cfg)
    grid = build_grid(cfg)
    data = make_initial_data(build_profile(cfg), grid, params, truncation_radius(cfg))
    opts = sweep_options(cfg)
    return limit.run_sweep(
        grid,
        params,
        data,
        opts["ladder"],
        opts["t_end"],
        flow=build_flow(cfg, params, grid.dim),
        config=build_solver_config(cfg),
        dt=opts["dt"],
        sample_fractions=opts["sample_fractions"],
        high_reg=opts["high_reg"],
        workers=workers if workers is not None else opts["workers"],
    )


@pytest.fixture(scope="module")
def sweep_1d():
    result = sweep_shipped()
    limit.attach_envelopes(result, derive_constants(build_params(load_shipped("sweep_1d.ini"))).iota)
    return result


# --- criterion 1: derived constants reproduce the hand-derived tables ---------------


def test_constants_match_hand_derived_tables():
    quadratic = ModelParameters(gamma=2.0, delta=2.0, alpha=1.0, beta=0.0)
    dc = derive_constants(quadratic)
    assert dc.m1 == pytest.approx(1.0, rel=REL)
    assert dc.m3 == pytest.approx(36.125, rel=REL)
    assert dc.m2 == pytest.approx(13.0625, rel=REL)
    assert check_conditions(quadratic).conditions == {"P4"}

    decaying = ModelParameters(gamma=2.0, delta=3.0, alpha=1.0, beta=-0.6)
    dc = derive_constants(decaying)
    assert dc.m1 == pytest.approx(1.0 / 7.0, rel=REL)
    assert dc.m3 == pytest.approx(64.0 / 35.0, rel=REL)
    assert dc.m2 == pytest.approx(-248.0 / 35.0, rel=REL)
    assert dc.eps_star == pytest.approx(0.5, rel=REL)
    assert dc.eta_star == pytest.approx(0.1, rel=REL)
    assert dc.b_star == pytest.approx(2.0, rel=REL)
    assert dc.iota == pytest.approx(1.8, rel=REL)
    assert "P1" in check_conditions(decaying).conditions


# --- criterion 2: background flow solves the pressureless transport equation --------


def test_background_flow_residual_and_contraction_bound(rng):
    affine = BackgroundFlow(
        InitialVelocity(
            dim=2,
            matrix=np.array([[1.0, 0.5], [0.0, 2.0]]),
            shift=np.array([0.3, -0.7]),
        )
    )
    ts = rng.uniform(0.0, 10.0, size=100)
    xs = rng.uniform(-2.0, 2.0, size=(100, 2))
    dt = 1e-4
    worst = 0.0
    for t, x in zip(ts, xs):
        pt = x[None, :]
        u_t = (affine.eval(t + dt, pt) - affine.eval(t - dt, pt)) / (2.0 * dt)
        adv = np.einsum("...ij,...j->...i", affine.grad(t, pt), affine.eval(t, pt))
        worst = max(worst, float(np.abs(u_t + adv).max()))
    assert worst < 1e-6, f"transport residual {worst:.3e}"

    identity = BackgroundFlow(InitialVelocity.identity(3))
    assert identity.k_matrix_bound(10.0) == 0.0


# --- criterion 3: semidiscrete operator, convergence order, vacuum fixed point ------


def test_solver_oracle_convergence_and_vacuum(p1_params, rng):
    grid = Grid(dim=1, cells=64, lo=-1.0, hi=1.0)
    sim = Simulation(grid, p1_params, config=SolverConfig(boundary="periodic"))
    form = stress_form("full", p1_params)
    bg = sim.background_fields(0.0)
    for _ in range(3):
        sound, visc, vel = trig_state(grid, rng)
        got = sim.rhs(sound, visc, vel, bg)
        want = oracle_rhs(grid, p1_params, form, sound, visc, vel, bg)
        for g, w in zip(got, want):
            np.testing.assert_allclose(g, w, rtol=1e-12, atol=1e-13)

    finals = {c: run_periodic(p1_params, c, dt=2e-4)[2] for c in (32, 64, 128)}
    errs = [
        np.abs(finals[c].sound - finals[2 * c].sound[::2]).max() for c in (32, 64)
    ]
    order = math.log2(errs[0] / errs[1])
    assert order >= 1.9, f"self-convergence order {order:.3f}"

    vac = State(0.0, grid.zeros(), grid.zeros(), np.zeros((1,) + grid.shape))
    flow = BackgroundFlow(InitialVelocity.identity(1))
    res = Simulation(Grid(dim=1, cells=64, lo=-2.0, hi=2.0), p1_params, flow).run(
        vac, 0.5
    )
    final = res.samples[-1][1]
    assert (final.sound == 0.0).all()
    assert (final.visc == 0.0).all()
    assert (final.vel == 0.0).all()


# --- criterion 4: weighted energy decays at the advertised rate ----------------------


def test_energy_decay_rate_and_grid_stability(decay_1d, coarse_3d):
    times, z = decay_1d[512]
    slope, _ = energy.fit_decay(times, z)
    assert slope <= -0.5, f"fitted decay slope {slope:.3f}"

    iota_fit = -slope
    sups = {
        cells: energy.weighted_sup(*decay_1d[cells], iota_fit) for cells in (512, 1024)
    }
    assert math.isfinite(sups[512]) and sups[512] > 0.0
    change = abs(sups[1024] - sups[512]) / sups[512]
    assert change < 0.10, f"weighted sup moved {change:.1%} under halving h"

    _, z3d = coarse_3d  # completing without BlowUpError is part of the criterion
    assert (np.diff(z3d) <= 0.0).all(), f"3d Z not nonincreasing: {z3d}"


# --- criterion 5: vanishing-viscosity convergence rates ------------------------------


def test_vanishing_viscosity_rates(sweep_1d):
    assert 0.8 <= sweep_1d.slopes["h1"] <= 1.2, sweep_1d.slopes
    assert 0.4 <= sweep_1d.slopes["d2"] <= 1.1, sweep_1d.slopes


# --- criterion 6: difference envelopes are continuous, exact at t=0, and binding -----


def test_gronwall_envelopes(sweep_1d):
    w0 = (0.1, 0.2, 0.5)
    ts = np.array([0.5, 1.0, 3.0])
    for knee in (1.75, 1.25):
        at = limit.gronwall_envelope(w0, knee, 3.0, 1e-2, ts)
        for side in (knee - 1e-6, knee + 1e-6):
            near = limit.gronwall_envelope(w0, side, 3.0, 1e-2, ts)
            for order in ("l2", "d1", "d2"):
                np.testing.assert_allclose(near[order], at[order], rtol=1e-4)

    at_zero = limit.gronwall_envelope(w0, 1.8, 10.0, 5e-3, 0.0)
    assert at_zero["l2"] == w0[0] ** 2
    assert at_zero["d1"] == w0[1] ** 2
    assert at_zero["d2"] == w0[2] ** 2

    # the constant fitted on the smallest viscosity bounds the whole ladder
    assert sweep_1d.c04 >= 0.0
    assert sweep_1d.envelope_ok, "no surviving ladder entries"
    assert all(sweep_1d.envelope_ok.values()), sweep_1d.envelope_ok


# --- criterion 7: comparison equation, threshold, blow-up time -----------------------


def test_comparison_ode_threshold_and_blowup(p1_params):
    derived = derive_constants(p1_params)
    key = 1.0 + derived.eps_star - 2.0 * derived.iota
    assert key == pytest.approx(-2.1, rel=REL)
    assert key < -1.0

    flow = ode.from_flow_constants(derived, c1=1.0, z0=1.0)
    assert ode.threshold(flow) == pytest.approx(math.sqrt(0.55), rel=REL)
    t_star = ode.blowup_time(flow)
    assert t_star == pytest.approx(0.45 ** (-1.0 / 1.1) - 1.0, abs=1e-9)
    dt = 1e-3
    _, _, t_blow = ode.solve_numeric(flow, 2.0, dt)
    assert abs(t_blow - t_star) < 2.0 * dt

    regimes = [
        ode.OdeParams(a=3.0, b=2.0, c1=0.0, d1=0.0, c2=0.0, d2=0.0, z0=0.7),
        ode.OdeParams(a=3.0, b=2.0, c1=0.0, d1=0.0, c2=1.0, d2=-2.0, z0=0.7),
        ode.from_flow_constants(derived, c1=1.0, z0=0.5),
    ]
    for p in regimes:
        times, numeric, t_blow = ode.solve_numeric(p, 4.0, dt)
        assert t_blow is None
        closed = ode.solve_closed_form(p, times)
        assert float(np.abs(closed - numeric).max()) <= 1e-6


# --- criterion 8: repeated runs are byte-identical -----------------------------------


def test_repeated_runs_byte_identical(p1_params):
    csvs = [limit.sweep_csv(sweep_shipped(workers=2)) for _ in range(2)]
    assert csvs[0] == csvs[1]

    def energy_csv():
        grid = Grid(dim=1, cells=64, lo=-1.0, hi=1.0)
        data = make_initial_data(
            DensityProfile(kind="gaussian", amplitude=0.01), grid, p1_params, 0.3
        )
        sim = Simulation(grid, p1_params)
        recorder = energy.EnergyRecorder(sim, max_order=3)
        state = State(0.0, data.sound.copy(), data.visc.copy(), np.array(data.vel))
        sim.run(state, 0.1, [0.05, 0.1], recorder=recorder)
        recorder.attach_envelope(1.8)
        return recorder.to_csv()

    assert energy_csv() == energy_csv()
