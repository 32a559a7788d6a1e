"""Weighted norms, decay fitting and the run recorder."""
import math

import numpy as np
import pytest

from vvlimit.energy import (
    EnergyRecorder,
    compute_norms,
    fit_decay,
    grad_norm_sq,
    theta,
    weighted_sup,
)
from vvlimit.errors import FitError
from vvlimit.grid import Grid
from vvlimit.kernels import numpy_ops
from vvlimit.solver import Simulation, SolverConfig, State


@pytest.fixture
def unit_grid():
    return Grid(dim=1, cells=64, lo=0.0, hi=1.0)


def test_zero_state_has_zero_norms(unit_grid, p1_params):
    state = State(0.0, unit_grid.zeros(), unit_grid.zeros(),
                  np.zeros((1, 64)))
    row = compute_norms(state, unit_grid, p1_params.epsilon)
    for k in range(4):
        assert row[f"Y{k}"] == 0.0
        assert row[f"U{k}"] == 0.0
    assert row["Z"] == 0.0


def test_sine_norms_discrete_and_continuum(unit_grid):
    # f = sin(2 pi x) on [0,1): each centered difference multiplies the
    # amplitude by sin(2 pi h)/h, so all discrete norms are closed form
    x = unit_grid.axis()
    f = np.sin(2.0 * np.pi * x)
    h = unit_grid.h
    mult = math.sin(2.0 * math.pi * h) / h
    assert grad_norm_sq(f, 0, unit_grid) == pytest.approx(0.5, rel=1e-13)
    assert grad_norm_sq(f, 1, unit_grid) == pytest.approx(0.5 * mult**2, rel=1e-12)
    assert grad_norm_sq(f, 2, unit_grid) == pytest.approx(0.5 * mult**4, rel=1e-12)
    assert grad_norm_sq(f, 3, unit_grid) == pytest.approx(0.5 * mult**6, rel=1e-12)
    # at N=64 the discrete first derivative norm sits 2e-3 below 2 pi
    assert math.sqrt(grad_norm_sq(f, 1, unit_grid)) == pytest.approx(
        2.0 * math.pi / math.sqrt(2.0), rel=2e-3
    )


def test_mixed_derivative_multiplicity():
    grid = Grid(dim=2, cells=32, lo=0.0, hi=1.0)
    x, y = grid.coords()
    f = np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)
    h = grid.h
    dxx = numpy_ops.diff1(numpy_ops.diff1(f, 0, h), 0, h)
    dxy = numpy_ops.diff1(numpy_ops.diff1(f, 0, h), 1, h)
    dyy = numpy_ops.diff1(numpy_ops.diff1(f, 1, h), 1, h)
    manual = grid.cell_volume * (
        np.sum(dxx * dxx) + 2.0 * np.sum(dxy * dxy) + np.sum(dyy * dyy)
    )
    assert grad_norm_sq(f, 2, grid) == pytest.approx(manual, rel=1e-14)


def test_norm_quadratic_scaling(unit_grid):
    x = unit_grid.axis()
    f = np.sin(2.0 * np.pi * x) + 0.3 * np.cos(4.0 * np.pi * x)
    for k in range(4):
        assert grad_norm_sq(2.0 * f, k, unit_grid) == 4.0 * grad_norm_sq(
            f, k, unit_grid
        )


def test_exclude_boundary_is_noop_for_interior_support(p1_params):
    grid = Grid(dim=1, cells=64, lo=-2.0, hi=2.0)
    r = np.abs(grid.axis())
    f = np.where(r < 1.0, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 7, 0.0)
    for k in range(4):
        # excluded cells carry exact zeros, so only the pairwise summation
        # order differs between the two evaluations
        assert grad_norm_sq(f, k, grid, exclude_boundary=True) == pytest.approx(
            grad_norm_sq(f, k, grid, exclude_boundary=False), rel=1e-13
        )


def test_exclude_boundary_needs_room():
    grid = Grid(dim=1, cells=8, lo=0.0, hi=1.0)
    f = np.ones(8)
    with pytest.raises(FitError, match="boundary layers"):
        grad_norm_sq(f, 4, grid, exclude_boundary=True)


def test_theta_weights():
    assert theta(0, 0.04) == 1.0
    assert theta(2, 0.04) == 1.0
    assert theta(3, 0.04) == pytest.approx(0.2, rel=1e-15)


def test_visc_norm_carries_theta(unit_grid):
    x = unit_grid.axis()
    visc = 0.5 + 0.2 * np.sin(2.0 * np.pi * x)
    state = State(0.0, unit_grid.zeros(), visc, np.zeros((1, 64)))
    row = compute_norms(state, unit_grid, eps=0.04)
    bare3 = math.sqrt(grad_norm_sq(visc, 3, unit_grid))
    assert row["U3"] == pytest.approx(0.2 * bare3, rel=1e-13)
    assert row["U1"] == pytest.approx(
        math.sqrt(grad_norm_sq(visc, 1, unit_grid)), rel=1e-13
    )


def test_z_aggregates_weighted_parts(unit_grid):
    x = unit_grid.axis()
    state = State(
        2.0,
        0.5 + 0.2 * np.sin(2.0 * np.pi * x),
        0.5 + 0.1 * np.cos(2.0 * np.pi * x),
        (0.1 * np.sin(4.0 * np.pi * x))[None, :],
    )
    row = compute_norms(state, unit_grid, eps=0.01)
    t = 2.0
    z2 = 0.0
    for k in range(4):
        z2 += (1.0 + t) ** (2.0 * (k - 2.5)) * row[f"Y{k}"] ** 2
        z2 += (1.0 + t) ** (2.0 * (k - 3.0)) * row[f"U{k}"] ** 2
    assert row["Z"] == pytest.approx(math.sqrt(z2), rel=1e-14)
    assert row["Z"] > 0.0


def test_fit_decay_recovers_power_law():
    t = np.linspace(0.0, 10.0, 21)
    z = 5.0 * (1.0 + t) ** (-1.8)
    slope, const = fit_decay(t, z)
    assert slope == pytest.approx(-1.8, abs=1e-9)
    assert const == pytest.approx(5.0, rel=1e-9)


def test_fit_decay_tolerates_mild_noise(rng):
    t = np.linspace(0.0, 10.0, 41)
    z = 2.0 * (1.0 + t) ** (-1.3) * np.exp(rng.normal(0.0, 1e-3, t.size))
    slope, const = fit_decay(t, z)
    assert slope == pytest.approx(-1.3, abs=5e-3)
    assert const == pytest.approx(2.0, rel=5e-3)


def test_fit_decay_skips_dead_samples():
    t = np.linspace(0.0, 5.0, 11)
    z = 3.0 * (1.0 + t) ** (-0.7)
    z[3] = 0.0
    z[7] = np.nan
    slope, _ = fit_decay(t, z)
    assert slope == pytest.approx(-0.7, abs=1e-9)


def test_fit_decay_needs_five_samples():
    t = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    z = np.array([1.0, 0.5, 0.0, -1.0, np.nan])
    with pytest.raises(FitError, match="5 positive samples"):
        fit_decay(t, z)


def test_weighted_sup():
    t = np.array([0.0, 1.0, 3.0])
    z = np.array([1.0, 0.5, 0.3])
    # (1+t)^1.5 * z = [1.0, 1.414, 2.4]
    assert weighted_sup(t, z, 1.5) == pytest.approx(0.3 * 4.0**1.5, rel=1e-13)


def make_recorder_run(params, eps=None, t_end=0.2):
    grid = Grid(dim=1, cells=64, lo=0.0, hi=2.0 * np.pi)
    p = params if eps is None else params.with_epsilon(eps)
    sim = Simulation(grid, p, config=SolverConfig(boundary="periodic"))
    x = grid.axis()
    state = State(0.0, 1.0 + 0.3 * np.sin(x), 1.0 + 0.3 * np.cos(x),
                  (0.2 * np.sin(2.0 * x))[None, :])
    rec = EnergyRecorder(sim)
    sim.run(state, t_end, sample_times=[0.0, 0.5 * t_end, t_end], recorder=rec)
    return rec


def test_recorder_rows_and_dissipation(p1_params):
    rec = make_recorder_run(p1_params)
    assert len(rec.rows) == 3
    assert rec.times()[0] == 0.0
    assert rec.rows[0]["dissipation"] == 0.0
    diss = [r["dissipation"] for r in rec.rows]
    assert all(b >= a for a, b in zip(diss, diss[1:]))
    assert diss[-1] > 0.0


def test_recorder_inviscid_has_no_dissipation(p1_params):
    rec = make_recorder_run(p1_params, eps=0.0)
    assert all(r["dissipation"] == 0.0 for r in rec.rows)


def test_recorder_envelope_and_csv(p1_params):
    rec = make_recorder_run(p1_params)
    c0 = rec.attach_envelope(1.8)
    assert c0 == pytest.approx(
        weighted_sup(rec.times(), rec.z_values(), 1.8), rel=1e-15
    )
    # the envelope upper-bounds Z at every sample by construction
    for r in rec.rows:
        assert r["envelope"] >= r["Z"] * (1.0 - 1e-12)
    text = rec.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,Y0,Y1,Y2,Y3,U0,U1,U2,U3,Z,dissipation,envelope"
    assert len(lines) == 4
    assert len(lines[1].split(",")) == 12
