"""Method-of-lines integrator for the symmetrized flow system.

Evolved fields on the grid:

    sound  scaled sound speed power of the density (scalar, >= 0)
    visc   viscosity weight rho^((delta-1)/2)      (scalar, >= 0)
    vel    velocity relative to the background flow (dim components)

The semidiscrete system, with w = vel + bg and eps the viscosity scale:

    sound_t = -(w . grad) sound - (gamma-1)/2 * sound * div w
    visc_t  = -(w . grad) visc  - (delta-1)/2 * visc  * div w
    vel_t   = -(vel . grad) vel - (gamma-1)/2 * sound * grad sound
              - (bg . grad) vel - (vel . grad) bg
              + eps * visc^2 * (c_lap * lap + c_gd * grad div)(vel + bg)
              + eps * sum_j d_j(visc^2) * Q_ij(vel + bg)

where (c_lap, c_gd) and the stress matrix Q depend on the chosen stress
form. Space is discretized with second order centered differences on a
periodic box; time stepping is the classical four stage Runge-Kutta
scheme under a CFL bound covering both the acoustic speed and the
degenerate diffusion. Setting eps = 0 skips the viscous terms entirely,
which makes the inviscid path the exact term deletion of the viscous one.

Two boundary modes exist. "periodic" is the plain torus, useful for
smooth convergence tests. "support" keeps compactly supported data away
from the box faces: after every stage the scalars are pinned to zero on
a collar of cells at the faces and vel is extended into the collar at
zeroth order; a margin monitor aborts once that zeroing starts removing
amplitude above the support tolerance, i.e. once the wrap-around stops
being inert.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .background import BackgroundFlow
from .constants import ModelParameters
from .errors import BlowUpError, PreconditionError
from .grid import Grid

STRESS_FORMS = ("full", "gradient", "laplacian")
BOUNDARY_MODES = ("support", "periodic")

# fields whose magnitude beyond this trip the blow-up detector
BLOWUP_THRESHOLD = 1e6
# dt below this fraction of (1+t) counts as step collapse
MIN_DT_FRACTION = 1e-12


@dataclass(frozen=True)
class StressForm:
    """Coefficients of one viscous stress variant.

    The acceleration operator is c_lap * lap + c_graddiv * grad div and
    the stress matrix contracted against grad(visc^2) is

        Q_ij(u) = (delta/(delta-1)) *
                  (q_grad * d_j u_i + q_gradt * d_i u_j + q_div * div u * I_ij).
    """

    c_lap: float
    c_graddiv: float
    q_grad: float
    q_gradt: float
    q_div: float


def stress_form(name: str, params: ModelParameters) -> StressForm:
    a, b = params.alpha, params.beta
    if name == "full":
        return StressForm(a, a + b, a, a, b)
    if name == "gradient":
        return StressForm(2.0 * a, b, 2.0 * a, 0.0, b)
    if name == "laplacian":
        return StressForm(a, 0.0, 0.0, 0.0, 0.0)
    raise PreconditionError(
        f"unknown stress form {name!r}; choose from {STRESS_FORMS}"
    )


@dataclass(frozen=True)
class SolverConfig:
    boundary: str = "support"
    stress: str = "full"
    hyper_coeff: float = 0.0
    collar: int = 4
    cfl_safety: float = 0.4
    support_tol: float = 1e-14
    vacuum_floor: float = 0.0

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise PreconditionError(
                f"unknown boundary mode {self.boundary!r}; choose from {BOUNDARY_MODES}"
            )
        if self.stress not in STRESS_FORMS:
            raise PreconditionError(
                f"unknown stress form {self.stress!r}; choose from {STRESS_FORMS}"
            )
        if self.hyper_coeff < 0.0:
            raise PreconditionError("hyper dissipation coefficient must be >= 0")
        if self.collar < 3:
            raise PreconditionError("collar must cover at least 3 cells")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise PreconditionError("cfl safety factor must be in (0, 1]")
        if self.vacuum_floor < 0.0:
            raise PreconditionError("vacuum floor must be >= 0")


@dataclass
class State:
    t: float
    sound: np.ndarray
    visc: np.ndarray
    vel: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.sound.copy(), self.visc.copy(), self.vel.copy())


@dataclass
class BackgroundFields:
    """Background velocity data sampled on the grid at one time."""

    vel: np.ndarray       # (dim, ...) components
    grad: np.ndarray      # (dim, dim, ...) entries d_j w_i at [i, j]
    div: np.ndarray
    accel: np.ndarray     # (c_lap*lap + c_graddiv*graddiv) w, (dim, ...)


@dataclass
class RunResult:
    samples: list[tuple[float, State]]
    steps: int
    clip_events: int
    dt_min: float
    dt_max: float
    cfl_history: list[tuple[float, float, float]] = field(default_factory=list)
    floor_events: int = 0


class Simulation:
    """One flow configuration bound to a grid and a background flow."""

    def __init__(
        self,
        grid: Grid,
        params: ModelParameters,
        flow: BackgroundFlow | None = None,
        config: SolverConfig | None = None,
    ):
        params.validate()
        if flow is not None and flow.dim != grid.dim:
            raise PreconditionError(
                f"flow dimension {flow.dim} does not match grid dimension {grid.dim}"
            )
        self.grid = grid
        self.params = params
        self.flow = flow
        self.config = config or SolverConfig()
        self.stress = stress_form(self.config.stress, params)
        self.clip_events = 0
        self.floor_events = 0
        self._collar_kill = 0.0
        self._bg_cache: tuple[float, BackgroundFields] | None = None

    # --- background sampling -------------------------------------------------

    def _zero_background(self) -> BackgroundFields:
        d, shape = self.grid.dim, self.grid.shape
        return BackgroundFields(
            vel=np.zeros((d,) + shape),
            grad=np.zeros((d, d) + shape),
            div=np.zeros(shape),
            accel=np.zeros((d,) + shape),
        )

    def background_fields(self, t: float) -> BackgroundFields:
        if self.flow is None:
            if self._bg_cache is None:
                self._bg_cache = (0.0, self._zero_background())
            return self._bg_cache[1]
        if self._bg_cache is not None and self._bg_cache[0] == t:
            return self._bg_cache[1]
        g = self.grid
        d = g.dim
        pts = np.moveaxis(g.points(), 0, -1)  # (..., dim)
        w = np.moveaxis(self.flow.eval(t, pts), -1, 0)
        gr = self.flow.grad(t, pts)  # (..., d, d)
        grad = np.moveaxis(gr, (-2, -1), (0, 1))
        div = np.zeros(g.shape)
        for i in range(d):
            div = div + grad[i, i]
        if self.flow.is_affine:
            # affine flows have vanishing second derivatives exactly
            accel = np.zeros((d,) + g.shape)
        else:
            s, h = self.stress, g.h
            accel = np.empty((d,) + g.shape)
            divw = sum(kernels.diff1(w[j], j, h) for j in range(d))
            for i in range(d):
                lap = sum(kernels.diff2(w[i], j, h) for j in range(d))
                accel[i] = s.c_lap * lap + s.c_graddiv * kernels.diff1(divw, i, h)
        bg = BackgroundFields(vel=w, grad=grad, div=div, accel=accel)
        self._bg_cache = (t, bg)
        return bg

    # --- spatial operator -----------------------------------------------------

    def rhs(
        self,
        sound: np.ndarray,
        visc: np.ndarray,
        vel: np.ndarray,
        bg: BackgroundFields,
        eps: float | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = self.grid
        d, h = g.dim, g.h
        p = self.params
        eps = p.epsilon if eps is None else eps
        gam1 = 0.5 * (p.gamma - 1.0)
        del1 = 0.5 * (p.delta - 1.0)

        dsound = [kernels.diff1(sound, j, h) for j in range(d)]
        dvisc = [kernels.diff1(visc, j, h) for j in range(d)]
        dvel = [[kernels.diff1(vel[i], j, h) for j in range(d)] for i in range(d)]
        divv = dvel[0][0]
        for i in range(1, d):
            divv = divv + dvel[i][i]
        divw = divv + bg.div

        sound_dot = -gam1 * sound * divw
        visc_dot = -del1 * visc * divw
        for j in range(d):
            wj = vel[j] + bg.vel[j]
            sound_dot = sound_dot - wj * dsound[j]
            visc_dot = visc_dot - wj * dvisc[j]

        vel_dot = np.empty_like(vel)
        for i in range(d):
            acc = -gam1 * sound * dsound[i]
            for j in range(d):
                acc = acc - vel[j] * dvel[i][j]
                acc = acc - bg.vel[j] * dvel[i][j]
                acc = acc - vel[j] * bg.grad[i][j]
            vel_dot[i] = acc

        if eps != 0.0:
            s = self.stress
            qc = p.delta / (p.delta - 1.0)
            visc2 = visc * visc
            dvisc2 = [kernels.diff1(visc2, j, h) for j in range(d)]
            graddivv = [kernels.diff1(divv, i, h) for i in range(d)]
            for i in range(d):
                lap = kernels.diff2(vel[i], 0, h)
                for j in range(1, d):
                    lap = lap + kernels.diff2(vel[i], j, h)
                own = s.c_lap * lap + s.c_graddiv * graddivv[i]
                acc = visc2 * (own + bg.accel[i])
                for j in range(d):
                    dwij = dvel[i][j] + bg.grad[i][j]
                    dwji = dvel[j][i] + bg.grad[j][i]
                    q_ij = s.q_grad * dwij + s.q_gradt * dwji
                    if i == j:
                        q_ij = q_ij + s.q_div * divw
                    acc = acc + dvisc2[j] * (qc * q_ij)
                vel_dot[i] = vel_dot[i] + eps * acc

        if self.config.hyper_coeff > 0.0:
            c = self.config.hyper_coeff / h
            for j in range(d):
                sound_dot = sound_dot - c * kernels.diff4_raw(sound, j)
                for i in range(d):
                    vel_dot[i] = vel_dot[i] - c * kernels.diff4_raw(vel[i], j)

        return sound_dot, visc_dot, vel_dot

    # --- constraints ------------------------------------------------------------

    def _collar_slices(self, axis: int):
        c = self.config.collar
        n = self.grid.cells
        lo = [slice(None)] * self.grid.dim
        hi = [slice(None)] * self.grid.dim
        lo[axis] = slice(0, c)
        hi[axis] = slice(n - c, n)
        src_lo = [slice(None)] * self.grid.dim
        src_hi = [slice(None)] * self.grid.dim
        src_lo[axis] = slice(c, c + 1)
        src_hi[axis] = slice(n - c - 1, n - c)
        return tuple(lo), tuple(hi), tuple(src_lo), tuple(src_hi)

    def apply_constraints(
        self, sound: np.ndarray, visc: np.ndarray, vel: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Clip scalars at zero and enforce the boundary collar in place."""
        neg = int(np.count_nonzero(sound < 0.0)) + int(np.count_nonzero(visc < 0.0))
        self.clip_events += neg
        # unconditional so that -0.0 stage results normalize back to +0.0
        np.maximum(sound, 0.0, out=sound)
        np.maximum(visc, 0.0, out=visc)
        floor = self.config.vacuum_floor
        if floor > 0.0:
            # Centered stencils shed a sub-tolerance tail off a degenerate
            # vacuum edge which the background transport then carries at the
            # grid-wide characteristic speed.  Drop it before it spreads; the
            # removed mass per application is bounded by floor * cell volume *
            # number of events, negligible against the truncation tolerance.
            low_s = sound < floor
            low_v = visc < floor
            self.floor_events += int(np.count_nonzero(low_s & (sound > 0.0)))
            self.floor_events += int(np.count_nonzero(low_v & (visc > 0.0)))
            sound[low_s] = 0.0
            visc[low_v] = 0.0
        if self.config.boundary == "support":
            for axis in range(self.grid.dim):
                lo, hi, src_lo, src_hi = self._collar_slices(axis)
                # record the largest scalar amplitude the zeroing removes;
                # the margin monitor aborts once it exceeds support_tol
                self._collar_kill = max(
                    self._collar_kill,
                    float(sound[lo].max(initial=0.0)),
                    float(sound[hi].max(initial=0.0)),
                    float(visc[lo].max(initial=0.0)),
                    float(visc[hi].max(initial=0.0)),
                )
                sound[lo] = 0.0
                sound[hi] = 0.0
                visc[lo] = 0.0
                visc[hi] = 0.0
                for i in range(self.grid.dim):
                    vel[i][lo] = vel[i][src_lo]
                    vel[i][hi] = vel[i][src_hi]
        return sound, visc, vel

    def check_support_margin(self, state: State) -> None:
        """Abort when the collar zeroing removes significant amplitude.

        The invariant of support mode is that the scalar support stays out
        of the boundary collar, where support means amplitude above
        ``support_tol``.  A degenerate vacuum edge under centered stencils
        trails a numerical halo whose level sets travel faster than the
        physical front, so long-horizon runs should place ``support_tol``
        at the smallest amplitude that matters for the recorded
        functionals and let the collar absorb the rest (optionally zeroed
        early via ``vacuum_floor``).
        """
        if self.config.boundary != "support":
            return
        kill = self._collar_kill
        self._collar_kill = 0.0
        if kill > self.config.support_tol:
            raise PreconditionError(
                f"support reached the boundary collar at t={state.t:.6g} "
                f"(amplitude {kill:.3e} above tolerance "
                f"{self.config.support_tol:.3e}); enlarge the box or "
                "shorten the run"
            )

    # --- time stepping ------------------------------------------------------------

    def cfl_limit(self, state: State) -> float:
        g = self.grid
        p = self.params
        bg = self.background_fields(state.t)
        gam1 = 0.5 * (p.gamma - 1.0)
        speed2 = np.zeros(g.shape)
        for i in range(g.dim):
            w = state.vel[i] + bg.vel[i]
            speed2 = speed2 + w * w
        wave = np.sqrt(speed2) + gam1 * state.sound * math.sqrt(g.dim)
        vmax = float(wave.max())
        dt_adv = g.h / vmax if vmax > 0.0 else math.inf
        dt_diff = math.inf
        if p.epsilon > 0.0:
            visc2max = float((state.visc * state.visc).max())
            denom = p.epsilon * visc2max * p.parabolic_coeff * 2.0 * g.dim
            if denom > 0.0:
                dt_diff = g.h * g.h / denom
        return self.config.cfl_safety * min(dt_adv, dt_diff)

    def step(self, state: State, dt: float) -> State:
        """Advance one classical Runge-Kutta step of size dt."""
        t = state.t
        s0, v0, u0 = state.sound, state.visc, state.vel

        k1 = self.rhs(s0, v0, u0, self.background_fields(t))
        a1 = self.apply_constraints(
            s0 + (0.5 * dt) * k1[0], v0 + (0.5 * dt) * k1[1], u0 + (0.5 * dt) * k1[2]
        )
        bg_half = self.background_fields(t + 0.5 * dt)
        k2 = self.rhs(*a1, bg_half)
        a2 = self.apply_constraints(
            s0 + (0.5 * dt) * k2[0], v0 + (0.5 * dt) * k2[1], u0 + (0.5 * dt) * k2[2]
        )
        k3 = self.rhs(*a2, bg_half)
        a3 = self.apply_constraints(s0 + dt * k3[0], v0 + dt * k3[1], u0 + dt * k3[2])
        k4 = self.rhs(*a3, self.background_fields(t + dt))

        w = dt / 6.0
        sound = s0 + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        visc = v0 + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        vel = u0 + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        self.apply_constraints(sound, visc, vel)

        new = State(t + dt, sound, visc, vel)
        top = max(
            float(np.abs(sound).max()),
            float(np.abs(visc).max()),
            float(np.abs(vel).max()),
        )
        if not math.isfinite(top) or top > BLOWUP_THRESHOLD:
            raise BlowUpError(f"fields left the finite range at t={new.t:.6g}", t=new.t)
        return new

    def run(
        self,
        initial: State,
        t_end: float,
        sample_times: list[float] | None = None,
        dt: float | None = None,
        recorder=None,
        max_steps: int = 10_000_000,
    ) -> RunResult:
        """Integrate to t_end, sampling the state at the requested times.

        With ``dt=None`` the step adapts to the CFL limit each step; an
        explicit dt is used as given but still validated against the
        limit. Sample times are hit exactly by clipping the step.
        """
        samples = sorted(set(sample_times or []) | {t_end})
        if samples[0] < 0.0 or samples[-1] > t_end + 1e-12:
            raise PreconditionError("sample times must lie in [0, t_end]")
        state = initial.copy()
        self.apply_constraints(state.sound, state.visc, state.vel)
        self.check_support_margin(state)
        out: list[tuple[float, State]] = [(state.t, state.copy())]
        if recorder is not None:
            recorder.on_sample(state)
        dt_min, dt_max = math.inf, 0.0
        history: list[tuple[float, float, float]] = []
        steps = 0
        next_idx = 0
        while samples[next_idx] <= state.t + 1e-14:
            next_idx += 1
            if next_idx >= len(samples):
                return RunResult(
                    out, steps, self.clip_events, 0.0, 0.0, history,
                    floor_events=self.floor_events,
                )
        while state.t < t_end - 1e-14:
            limit = self.cfl_limit(state)
            step_dt = limit if dt is None else dt
            if dt is not None and dt > limit * (1.0 + 1e-9):
                raise PreconditionError(
                    f"requested dt={dt:.6g} exceeds the CFL limit {limit:.6g} "
                    f"at t={state.t:.6g}"
                )
            step_dt = min(step_dt, samples[next_idx] - state.t)
            if step_dt < MIN_DT_FRACTION * (1.0 + state.t):
                raise BlowUpError(
                    f"time step collapsed at t={state.t:.6g}", t=state.t
                )
            before = state
            state = self.step(state, step_dt)
            steps += 1
            self.check_support_margin(state)
            if recorder is not None:
                recorder.on_step(before, step_dt)
            dt_min = min(dt_min, step_dt)
            dt_max = max(dt_max, step_dt)
            history.append((state.t, step_dt, limit))
            if steps > max_steps:
                raise BlowUpError("step budget exhausted", t=state.t)
            if state.t >= samples[next_idx] - 1e-14:
                out.append((samples[next_idx], state.copy()))
                if recorder is not None:
                    recorder.on_sample(state)
                next_idx += 1
                if next_idx >= len(samples):
                    break
        return RunResult(
            out, steps, self.clip_events, dt_min if steps else 0.0, dt_max, history,
            floor_events=self.floor_events,
        )

    # --- physical reconstruction ---------------------------------------------------

    def reconstruct_physical(
        self, state: State
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Recover (density, total velocity, pressure) from a state."""
        p = self.params
        rho = density_from_sound(state.sound, p)
        if self.flow is None:
            u = state.vel.copy()
        else:
            u = state.vel + self.background_fields(state.t).vel
        pressure = p.pressure_coeff * rho**p.gamma
        return rho, u, pressure


def density_from_sound(sound: np.ndarray, params: ModelParameters) -> np.ndarray:
    base = sound / params.sound_scale
    return base ** (2.0 / (params.gamma - 1.0))
