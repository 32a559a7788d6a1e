"""Model parameters, derived structure constants and admissibility checks.

The flow model is isentropic compressible flow with pressure
``P = A rho^gamma`` and density-degenerate viscosities
``mu = eps * alpha * rho^delta``, ``lambda = eps * beta * rho^delta``.
From (gamma, delta, alpha, beta) a chain of structure constants is
derived that controls whether the weighted energy of a solution decays:

* M1       ratio (2a+3b)/(2a+b) measuring how far the bulk viscosity is
           from the critical combination 2a+3b=0,
* M3       dissipation structure constant collecting the three ways the
           viscosity couples to the density weight,
* M2       net growth exponent of the top-order weight, negative means
           the weight estimate closes,
* eps_star small exponent correction available once M2 < -1,
* M4       eps_star + M2, the corrected growth exponent,
* eta_star loss factor applied to the decay exponent,
* b_star   raw decay exponent of the weighted energy,
* d_star   dissipation decay exponent (3/2)delta - M3/4,
* iota     final decay exponent (1 - eta_star) * b_star,
* decay_r  exponent in the transport-weight lower bound, gamma dependent.

Four admissibility conditions are recognised:

* P1: 0 < M1 < 3/2 - 1/delta and M2 < -1,
* P2: 2*alpha + 3*beta = 0,
* P3: delta >= 2*gamma - 1,
* P4: delta = gamma.

The derived constants drive the decay claims only under P1; under
P2-P4 they are still reported but carry no certified inequalities
(`certify_p1` is the gate used by the decay pipelines).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import PreconditionError

# caps appearing in the eps_star / eta_star formulas; the main statement
# uses (1, 1/10), the step-by-step proof variant tightens to (1/10, 1/20)
EPS_STAR_CAP = 1.0
ETA_STAR_CAP = 0.1
EPS_STAR_CAP_PROOF = 0.1
ETA_STAR_CAP_PROOF = 0.05


@dataclass(frozen=True)
class ModelParameters:
    """Physical parameters of one flow configuration."""

    gamma: float
    delta: float
    alpha: float
    beta: float
    pressure_coeff: float = 1.0
    epsilon: float = 1.0
    kappa: float = 1.0

    def validate(self) -> None:
        if not self.gamma > 1.0:
            raise PreconditionError(f"gamma must be > 1, got {self.gamma}")
        if not self.delta > 1.0:
            raise PreconditionError(f"delta must be > 1, got {self.delta}")
        if not self.alpha > 0.0:
            raise PreconditionError(f"alpha must be > 0, got {self.alpha}")
        if self.shear_bulk < 0.0 and not self._critical_combo_zero():
            raise PreconditionError(
                f"2*alpha + 3*beta must be >= 0, got {self.shear_bulk}"
            )
        if not self.pressure_coeff > 0.0:
            raise PreconditionError(
                f"pressure coefficient must be > 0, got {self.pressure_coeff}"
            )
        # epsilon == 0 is allowed and runs the inviscid path
        if not 0.0 <= self.epsilon <= 1.0:
            raise PreconditionError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not self.kappa > 0.0:
            raise PreconditionError(f"kappa must be > 0, got {self.kappa}")

    def _critical_combo_zero(self) -> bool:
        scale = max(1.0, abs(2.0 * self.alpha) + abs(3.0 * self.beta))
        return abs(self.shear_bulk) <= 1e-12 * scale

    @property
    def shear_bulk(self) -> float:
        """The combination 2*alpha + 3*beta."""
        return 2.0 * self.alpha + 3.0 * self.beta

    @property
    def parabolic_coeff(self) -> float:
        """The combination 2*alpha + beta (sets the diffusion CFL scale)."""
        return 2.0 * self.alpha + self.beta

    @property
    def sound_scale(self) -> float:
        """Factor turning rho^((gamma-1)/2) into the scaled sound field."""
        return math.sqrt(
            4.0 * self.pressure_coeff * self.gamma / (self.gamma - 1.0) ** 2
        )

    @property
    def sound_exponent(self) -> float:
        return 0.5 * (self.gamma - 1.0)

    @property
    def visc_exponent(self) -> float:
        return 0.5 * (self.delta - 1.0)

    @property
    def consistency_exponent(self) -> float:
        """Exponent e with visc = const * sound^e pointwise."""
        return (self.delta - 1.0) / (self.gamma - 1.0)

    @property
    def consistency_coeff(self) -> float:
        """Constant c with visc = c * sound^e pointwise."""
        return (1.0 / self.sound_scale) ** self.consistency_exponent

    def with_epsilon(self, epsilon: float) -> "ModelParameters":
        return ModelParameters(
            gamma=self.gamma,
            delta=self.delta,
            alpha=self.alpha,
            beta=self.beta,
            pressure_coeff=self.pressure_coeff,
            epsilon=epsilon,
            kappa=self.kappa,
        )


@dataclass(frozen=True)
class DerivedConstants:
    m1: float
    m2: float
    m3: float
    m4: float
    eps_star: float
    eta_star: float
    b_star: float
    d_star: float
    iota: float
    decay_r: float

    def as_record(self) -> dict[str, float]:
        return asdict(self)


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.copysign(math.inf, num) if num != 0.0 else math.nan
    return num / den


def derive_constants(
    params: ModelParameters, proof_variant: bool = False
) -> DerivedConstants:
    """Derive the structure constants from the physical parameters.

    With ``proof_variant=True`` the tighter caps from the step-by-step
    argument (1/10 for eps_star, 1/20 for eta_star) replace the
    statement-level caps (1, 1/10). Both variants agree on every other
    formula.
    """
    params.validate()
    gamma, delta = params.gamma, params.delta
    sa = params.parabolic_coeff
    sb = params.shear_bulk
    dm = delta - 1.0

    m1 = sb / sa
    m3 = (
        dm * dm / (4.0 * sa)
        + 4.0 * delta * delta * sa * m1 * m1 / (dm * dm)
        + 2.0 * m1 * delta
    )
    m2 = -3.0 * delta + 1.0 + 0.5 * m3

    eps_cap = EPS_STAR_CAP_PROOF if proof_variant else EPS_STAR_CAP
    eps_star = 0.5 * min(1.5 * (gamma - 1.0), 0.5 * (-m2 - 1.0), eps_cap)
    m4 = eps_star + m2

    eta_cap = ETA_STAR_CAP_PROOF if proof_variant else ETA_STAR_CAP
    eta_star = min(
        3.0 * (gamma - 1.0) / (4.0 * (3.0 * gamma - 1.0)),
        _ratio(-m4 - 1.0, 6.0 * delta - m3),
        eta_cap,
    )

    d_star = 1.5 * delta - 0.25 * m3
    if gamma >= 5.0 / 3.0:
        b_star = min(2.0, d_star)
        decay_r = -0.5
    else:
        b_star = min(1.5 * gamma - 0.5, d_star)
        decay_r = 1.5 * gamma - 3.0
    iota = (1.0 - eta_star) * b_star

    return DerivedConstants(
        m1=m1,
        m2=m2,
        m3=m3,
        m4=m4,
        eps_star=eps_star,
        eta_star=eta_star,
        b_star=b_star,
        d_star=d_star,
        iota=iota,
        decay_r=decay_r,
    )


@dataclass(frozen=True)
class ConditionReport:
    p1: bool
    p2: bool
    p3: bool
    p4: bool
    m1: float
    m2: float
    m1_upper: float

    @property
    def conditions(self) -> frozenset[str]:
        held = set()
        if self.p1:
            held.add("P1")
        if self.p2:
            held.add("P2")
        if self.p3:
            held.add("P3")
        if self.p4:
            held.add("P4")
        return frozenset(held)

    @property
    def admissible(self) -> bool:
        return bool(self.conditions)


def check_conditions(params: ModelParameters) -> ConditionReport:
    """Classify which of the admissibility conditions P1-P4 hold."""
    params.validate()
    dc = derive_constants(params)
    m1_upper = 1.5 - 1.0 / params.delta
    p1 = (0.0 < dc.m1 < m1_upper) and dc.m2 < -1.0
    p2 = params._critical_combo_zero()
    p3 = params.delta >= 2.0 * params.gamma - 1.0
    p4 = params.delta == params.gamma
    return ConditionReport(
        p1=p1, p2=p2, p3=p3, p4=p4, m1=dc.m1, m2=dc.m2, m1_upper=m1_upper
    )


def certify_p1(
    params: ModelParameters, proof_variant: bool = False
) -> DerivedConstants:
    """Check P1 and the inequality chain the decay claims rest on.

    Raises PreconditionError unless P1 holds together with M2 < -1,
    eps_star > 0, M4 < -1, d_star > 1, b_star > 1 and iota in (1, 2).
    Returns the derived constants on success.
    """
    report = check_conditions(params)
    if not report.p1:
        raise PreconditionError(
            "condition P1 fails: need 0 < M1 < 3/2 - 1/delta and M2 < -1, "
            f"got M1={report.m1:.6g} (upper {report.m1_upper:.6g}), "
            f"M2={report.m2:.6g}"
        )
    dc = derive_constants(params, proof_variant=proof_variant)
    checks = [
        (dc.m2 < -1.0, f"M2 < -1 fails: {dc.m2:.6g}"),
        (dc.eps_star > 0.0, f"eps_star > 0 fails: {dc.eps_star:.6g}"),
        (-dc.m4 - 1.0 > 0.0, f"M4 < -1 fails: {dc.m4:.6g}"),
        (dc.d_star > 1.0, f"d_star > 1 fails: {dc.d_star:.6g}"),
        (dc.b_star > 1.0, f"b_star > 1 fails: {dc.b_star:.6g}"),
        (1.0 < dc.iota < 2.0, f"iota in (1,2) fails: {dc.iota:.6g}"),
    ]
    failed = [msg for ok, msg in checks if not ok]
    if failed:
        raise PreconditionError("P1 certification failed: " + "; ".join(failed))
    return dc
