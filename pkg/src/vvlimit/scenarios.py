"""Initial data generators: density profiles, cutoffs and epsilon families.

A scenario produces the three evolved fields from a nonnegative density
rho0:

    sound = sound_scale * rho0^((gamma-1)/2)   scaled sound speed power
    visc  = rho0^((delta-1)/2)                 viscosity weight
    vel   = 0                                  velocity relative to background

so that visc = c * sound^e pointwise with e = (delta-1)/(gamma-1) and
c = sound_scale^(-e). Profiles with unbounded support can be truncated by
the radial cutoff `cutoff(r)` (quintic smoothstep transition on 1<r<2);
truncation is applied to the density as rho0 * F^w with
w = 2*max(1, 1/e)/(gamma-1), which keeps both power fields smooth at the
support edge and keeps the pointwise power relation exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import ModelParameters
from .errors import PreconditionError
from .grid import Grid

PROFILE_KINDS = ("inverse_power", "bump", "gaussian", "cusp")


# --- radial cutoff -----------------------------------------------------------
# cutoff(r) = 1 for r <= 1, 0 for r >= 2, quintic smoothstep in between;
# scaled copies cutoff(r/N) obey |d^k/dr^k| <= C_k / N^k with N-free C_k.

def _smoothstep(s: np.ndarray) -> np.ndarray:
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def _smoothstep_d1(s: np.ndarray) -> np.ndarray:
    return s * s * (30.0 + s * (-60.0 + 30.0 * s))


def _smoothstep_d2(s: np.ndarray) -> np.ndarray:
    return s * (60.0 + s * (-180.0 + 120.0 * s))


def _smoothstep_d3(s: np.ndarray) -> np.ndarray:
    return 60.0 + s * (-360.0 + 360.0 * s)


def cutoff(r: np.ndarray | float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    return 1.0 - _smoothstep(s)


def cutoff_derivative(r: np.ndarray | float, order: int) -> np.ndarray:
    """Radial derivative of the cutoff; zero outside the transition band."""
    r = np.asarray(r, dtype=float)
    inside = (r > 1.0) & (r < 2.0)
    s = np.where(inside, r - 1.0, 0.0)
    table = {1: _smoothstep_d1, 2: _smoothstep_d2, 3: _smoothstep_d3}
    if order not in table:
        raise ValueError(f"cutoff derivatives available for orders 1..3, got {order}")
    return np.where(inside, -table[order](s), 0.0)


def scaled_cutoff(r: np.ndarray, radius: float) -> np.ndarray:
    return cutoff(np.asarray(r, dtype=float) / radius)


# --- density profiles --------------------------------------------------------

def sigma_lower_bound(kind: str, params: ModelParameters) -> float:
    """Minimal admissible decay parameter sigma for a profile kind."""
    base = max(1.0 / (params.delta - 1.0), 1.0 / (params.gamma - 1.0))
    if kind == "inverse_power":
        return 1.5 * base
    if kind == "bump":
        return 3.0 * base
    if kind == "cusp":
        return 1.5 * base + 0.5
    if kind == "gaussian":
        return 0.0
    raise PreconditionError(f"unknown profile kind {kind!r}; choose from {PROFILE_KINDS}")


@dataclass(frozen=True)
class DensityProfile:
    """Radial initial density rho0(|x|)."""

    kind: str
    amplitude: float = 1.0
    sigma: float = 0.0
    support_radius: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise PreconditionError(
                f"unknown profile kind {self.kind!r}; choose from {PROFILE_KINDS}"
            )
        if not self.amplitude > 0.0:
            raise PreconditionError(f"amplitude must be > 0, got {self.amplitude}")
        if self.kind == "bump" and not self.support_radius > 0.0:
            raise PreconditionError(
                f"support radius must be > 0, got {self.support_radius}"
            )

    def validate_sigma(self, params: ModelParameters) -> None:
        bound = sigma_lower_bound(self.kind, params)
        if self.kind != "gaussian" and not self.sigma > bound:
            raise PreconditionError(
                f"profile {self.kind!r} needs sigma > {bound:.6g}, got {self.sigma}"
            )

    def rho(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "inverse_power":
            return self.amplitude / (1.0 + r) ** (2.0 * self.sigma)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r * r)
        if self.kind == "cusp":
            return self.amplitude * r / (1.0 + r) ** (2.0 * self.sigma)
        # compactly supported cosine arch raised to 2*sigma: variation is
        # spread over the whole support, so third differences of the power
        # fields converge at coarse per-support resolutions
        g = np.cos(0.5 * np.pi * np.minimum(r / self.support_radius, 1.0))
        return np.where(
            r < self.support_radius, self.amplitude * g ** (2.0 * self.sigma), 0.0
        )

    @property
    def compactly_supported(self) -> bool:
        return self.kind == "bump"


@dataclass
class InitialData:
    sound: np.ndarray
    visc: np.ndarray
    vel: np.ndarray
    rho: np.ndarray
    meta: dict = field(default_factory=dict)


def _fields_from_density(rho: np.ndarray, grid: Grid, params: ModelParameters):
    sound = params.sound_scale * rho**params.sound_exponent
    visc = rho**params.visc_exponent
    vel = np.zeros((grid.dim,) + grid.shape)
    return sound, visc, vel


def make_initial_data(
    profile: DensityProfile,
    grid: Grid,
    params: ModelParameters,
    truncation_radius: float | None = None,
) -> InitialData:
    """Build the evolved fields from a density profile on a grid.

    ``truncation_radius`` cuts unbounded-support profiles off over the
    annulus radius < |x| < 2*radius. Compactly supported profiles need no
    truncation; passing a radius anyway is allowed and is a no-op when
    the support already sits inside it.
    """
    profile.validate_sigma(params)
    r = grid.radius()
    rho = profile.rho(r)
    meta: dict = {
        "profile": profile.kind,
        "amplitude": profile.amplitude,
        "sigma": profile.sigma,
    }
    if truncation_radius is not None:
        if not truncation_radius > 0.0:
            raise PreconditionError(
                f"truncation radius must be > 0, got {truncation_radius}"
            )
        e = params.consistency_exponent
        w = 2.0 * max(1.0, 1.0 / e) / (params.gamma - 1.0)
        rho = rho * scaled_cutoff(r, truncation_radius) ** w
        meta["truncation_radius"] = truncation_radius
        meta["truncation_density_exponent"] = w
    sound, visc, vel = _fields_from_density(rho, grid, params)
    return InitialData(sound=sound, visc=visc, vel=vel, rho=rho, meta=meta)


def make_eps_family_data(
    profile: DensityProfile,
    grid: Grid,
    params: ModelParameters,
    eps: float,
    p: float,
    q: float,
    eta: float,
    tail_exponent: float,
) -> InitialData:
    """Mollified family approximating a base density as eps -> 0.

    The (gamma-1)/2 power of the family is

        rho0^((gamma-1)/2) * cutoff(eps^q |x|) + eta * eps^p * f^((gamma-1)/2)

    with the positive tail f(x) = 1/(1 + |x|^(2a)), a = ``tail_exponent``.
    Requires a > max(3/(2(gamma-1)), 3/(2(delta-1))) so the tail powers
    have three square-integrable derivatives, and for consistency
    exponents 2 < e < 3 additionally 1/2 - (3-e)(p + a q (gamma-1)) >= 0.
    """
    if not (eps > 0.0 and p > 0.0 and q > 0.0 and eta > 0.0):
        raise PreconditionError("eps, p, q and eta must all be positive")
    a = tail_exponent
    a_min = max(
        3.0 / (2.0 * (params.gamma - 1.0)), 3.0 / (2.0 * (params.delta - 1.0))
    )
    if not a > a_min:
        raise PreconditionError(
            f"tail exponent must exceed {a_min:.6g}, got {a}"
        )
    e = params.consistency_exponent
    if 2.0 < e < 3.0:
        margin = 0.5 - (3.0 - e) * (p + a * q * (params.gamma - 1.0))
        if margin < 0.0:
            raise PreconditionError(
                "mollification too aggressive for consistency exponent "
                f"e={e:.6g}: need 1/2 - (3-e)(p + a q (gamma-1)) >= 0, "
                f"got {margin:.6g}"
            )
    profile.validate_sigma(params)
    r = grid.radius()
    g1 = params.sound_exponent
    base_power = profile.rho(r) ** g1
    tail_power = (1.0 / (1.0 + r ** (2.0 * a))) ** g1
    power = base_power * cutoff(eps**q * r) + eta * eps**p * tail_power
    rho = power ** (1.0 / g1)
    sound, visc, vel = _fields_from_density(rho, grid, params)
    meta = {
        "profile": profile.kind,
        "eps": eps,
        "p": p,
        "q": q,
        "eta": eta,
        "tail_exponent": a,
    }
    return InitialData(sound=sound, visc=visc, vel=vel, rho=rho, meta=meta)


def support_extent(fieldarr: np.ndarray, grid: Grid, tol: float = 1e-14) -> float:
    """Largest |x| at which the field exceeds tol, 0 for an empty field."""
    mask = np.abs(fieldarr) > tol
    if not mask.any():
        return 0.0
    return float(grid.radius()[mask].max())
