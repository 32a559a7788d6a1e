"""Scalar comparison equation for the weighted energy aggregate.

The global-existence argument reduces to the Bernoulli-type problem

    Z' = -b Z / (1 + t) + c1 (1 + t)^d1 Z^a + c2 (1 + t)^d2 Z,  Z(0) = z0,

with a > 1, c1 >= 0 and z0 >= 0. With the integrating factor

    mu(t) = (1 + t)^(-b) exp(c2 K(t)),   K(t) = int_0^t (1 + s)^d2 ds,

the substitution Z = mu V linearizes Z^(1-a) and yields the closed form

    Z(t) = mu(t) [ z0^(1-a) - (a - 1) c1 J(t) ]^(-1/(a-1)),
    J(t) = int_0^t (1 + s)^d1 mu(s)^(a-1) ds.

The solution is global exactly when the bracket stays positive, i.e.
when z0 <= Lambda = ((a - 1) c1 J(inf))^(-1/(a-1)); above the threshold
it blows up at the unique root t* of the bracket. J has a closed form
when c2 = 0 (a pure power integral with exponent xi = d1 - (a-1) b) and
is evaluated by adaptive quadrature otherwise. mu is always closed
form because K is a power integral.

The flow-driven instance couples a = 3, b = iota, d1 = 1 + eps_star,
d2 = -1 - eps_star to the derived structure constants, so the
convergence condition xi < -1 is the key inequality 1 + eps_star -
2 iota < -1 checked by the admissibility certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .constants import DerivedConstants
from .errors import FitError, PreconditionError

BISECT_RTOL = 1e-10
NUMERIC_BLOWUP = 1e12
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12


def power_integral(p: float, t):
    """int_0^t (1 + s)^p ds, exactly zero at t = 0.

    Uses expm1/log1p so the result stays accurate near t = 0 and
    degrades gracefully to the log branch as p -> -1.
    """
    t = np.asarray(t, dtype=float)
    lt = np.log1p(t)
    if p == -1.0:
        out = lt
    else:
        out = np.expm1((p + 1.0) * lt) / (p + 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OdeParams:
    a: float
    b: float
    c1: float
    d1: float
    c2: float = 0.0
    d2: float = 0.0
    z0: float = 1.0

    def __post_init__(self):
        if not self.a > 1.0:
            raise PreconditionError(f"superlinear exponent must exceed 1, got a={self.a}")
        if self.c1 < 0.0:
            raise PreconditionError(f"forcing coefficient must be >= 0, got c1={self.c1}")
        if self.z0 < 0.0:
            raise PreconditionError(f"initial value must be >= 0, got z0={self.z0}")

    @property
    def xi(self) -> float:
        """Power-law exponent of the inner integrand when c2 = 0."""
        return self.d1 - (self.a - 1.0) * self.b

    def with_z0(self, z0: float) -> "OdeParams":
        return OdeParams(self.a, self.b, self.c1, self.d1, self.c2, self.d2, z0)


def from_flow_constants(
    derived: DerivedConstants, c1: float, c2: float = 0.0, z0: float = 1.0
) -> OdeParams:
    """Comparison problem driven by the derived structure constants."""
    return OdeParams(
        a=3.0,
        b=derived.iota,
        c1=c1,
        d1=1.0 + derived.eps_star,
        c2=c2,
        d2=-1.0 - derived.eps_star,
        z0=z0,
    )


def integrating_factor(p: OdeParams, t):
    return np.exp(
        -p.b * np.log1p(np.asarray(t, dtype=float))
        + p.c2 * power_integral(p.d2, t)
    )


def tail_exponent(p: OdeParams) -> float:
    """Effective power of (1+s) in the inner integrand as s -> inf.

    Infinite values encode the stretched-exponential regimes: +inf when
    c2 > 0 feeds a non-integrable tail (d2 > -1), -inf when c2 < 0
    suppresses it faster than any power.
    """
    if p.c2 == 0.0 or p.d2 < -1.0:
        return p.xi
    if p.d2 == -1.0:
        return p.xi + (p.a - 1.0) * p.c2
    return math.inf if p.c2 > 0.0 else -math.inf


def _inner_integrand(p: OdeParams, s: float) -> float:
    return (1.0 + s) ** p.d1 * integrating_factor(p, s) ** (p.a - 1.0)


def inner_integral(p: OdeParams, t):
    """J(t), closed form for c2 = 0 and adaptive quadrature otherwise."""
    if p.c2 == 0.0:
        return power_integral(p.xi, t)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    vals = np.empty_like(ts)
    for i, ti in enumerate(ts):
        vals[i], _ = quad(
            lambda s: _inner_integrand(p, s), 0.0, ti,
            epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200,
        )
    return float(vals[0]) if np.ndim(t) == 0 else vals


def inner_integral_infinity(p: OdeParams) -> float:
    """J(inf); infinite when the integrand has a non-integrable tail."""
    if tail_exponent(p) >= -1.0:
        return math.inf
    if p.c2 == 0.0:
        return -1.0 / (p.xi + 1.0)
    val, _ = quad(
        lambda s: _inner_integrand(p, s), 0.0, math.inf,
        epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400,
    )
    return val


def threshold(p: OdeParams) -> float:
    """Largest z0 with a global solution.

    inf when the superlinear term is absent, 0 when the inner integral
    diverges (no positive datum survives), and the finite Bernoulli
    threshold otherwise.
    """
    if p.c1 == 0.0:
        return math.inf
    j_inf = inner_integral_infinity(p)
    if math.isinf(j_inf):
        return 0.0
    return ((p.a - 1.0) * p.c1 * j_inf) ** (-1.0 / (p.a - 1.0))


def bracket(p: OdeParams, t):
    """z0^(1-a) - (a-1) c1 J(t); the solution blows up at its root."""
    if p.z0 <= 0.0:
        raise PreconditionError("bracket undefined for z0 = 0")
    lead = p.z0 ** (1.0 - p.a)
    return lead - (p.a - 1.0) * p.c1 * inner_integral(p, t)


def blowup_time(p: OdeParams) -> float:
    """Root of the bracket by bisection, inf for global solutions."""
    if p.z0 == 0.0 or p.z0 <= threshold(p):
        return math.inf
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if bracket(p, hi) < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise FitError("failed to bracket the blow-up time")
    while hi - lo > BISECT_RTOL * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if bracket(p, mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_closed_form(p: OdeParams, times):
    """Exact solution at the given times; nan after blow-up."""
    times = np.asarray(times, dtype=float)
    if p.z0 == 0.0:
        return np.zeros_like(times)
    br = np.asarray(bracket(p, times), dtype=float)
    mu = integrating_factor(p, times)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = mu * np.where(br > 0.0, br, np.nan) ** (-1.0 / (p.a - 1.0))
    return z


def _rhs(p: OdeParams, t: float, z: float) -> float:
    return (
        -p.b * z / (1.0 + t)
        + p.c1 * (1.0 + t) ** p.d1 * z ** p.a
        + p.c2 * (1.0 + t) ** p.d2 * z
    )


def solve_numeric(
    p: OdeParams, t_end: float, dt: float, blow_threshold: float = NUMERIC_BLOWUP
):
    """Classical fourth-order Runge-Kutta integration of the equation.

    Returns (times, values, t_blow); t_blow is None when the solution
    stays below blow_threshold up to t_end, else the time at which it
    first left the finite range (accurate to O(dt) because the blow-up
    is superlinear).
    """
    if dt <= 0.0:
        raise PreconditionError(f"step size must be positive, got dt={dt}")
    times = [0.0]
    values = [p.z0]
    t, z = 0.0, p.z0
    n_steps = int(math.ceil(t_end / dt - 1e-12))
    for _ in range(n_steps):
        h = min(dt, t_end - t)
        try:
            k1 = _rhs(p, t, z)
            k2 = _rhs(p, t + 0.5 * h, z + 0.5 * h * k1)
            k3 = _rhs(p, t + 0.5 * h, z + 0.5 * h * k2)
            k4 = _rhs(p, t + h, z + h * k3)
            z_new = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        except OverflowError:
            z_new = math.inf
        t += h
        if not math.isfinite(z_new) or abs(z_new) > blow_threshold:
            return np.array(times), np.array(values), t
        z = z_new
        times.append(t)
        values.append(z)
    return np.array(times), np.array(values), None
