"""Structure-constant chain against hand-computed reference values.

The two parameter sets exercised here were worked out independently on
paper: gamma = delta = 2 (shear only, P4) and gamma = 2, delta = 3 with
beta = -0.6 (the admissible P1 set used by the decay configs).
"""
import math

import pytest
from hypothesis import given, strategies as st

from vvlimit.constants import (
    ModelParameters,
    certify_p1,
    check_conditions,
    derive_constants,
)
from vvlimit.errors import PreconditionError

REL = 1e-12


def test_p4_reference_set(p4_params):
    # M1 = (2+0)/(2+0) = 1
    # M3 = 1/8 + 4*4*2*1/1 + 2*1*2 = 0.125 + 32 + 4 = 36.125
    # M2 = -6 + 1 + 18.0625 = 13.0625 (weight estimate does not close)
    dc = derive_constants(p4_params)
    assert dc.m1 == pytest.approx(1.0, rel=REL)
    assert dc.m3 == pytest.approx(36.125, rel=REL)
    assert dc.m2 == pytest.approx(13.0625, rel=REL)
    report = check_conditions(p4_params)
    assert report.conditions == frozenset({"P4"})
    assert report.admissible


def test_p1_reference_set(p1_params):
    # 2a+b = 1.4, 2a+3b = 0.2, M1 = 1/7
    # M3 = 4/5.6 + 36*1.4/(49*4) + 6/7 = 0.714285.. + 0.257142.. + 0.857142..
    dc = derive_constants(p1_params)
    assert dc.m1 == pytest.approx(1.0 / 7.0, rel=REL)
    assert dc.m3 == pytest.approx(1.8285714285714285, rel=REL)
    assert dc.m2 == pytest.approx(-7.085714285714286, rel=REL)
    assert dc.eps_star == pytest.approx(0.5, rel=REL)
    assert dc.m4 == pytest.approx(-6.585714285714286, rel=REL)
    assert dc.eta_star == pytest.approx(0.1, rel=REL)
    assert dc.b_star == pytest.approx(2.0, rel=REL)
    assert dc.d_star == pytest.approx(4.042857142857143, rel=REL)
    assert dc.iota == pytest.approx(1.8, rel=REL)
    assert dc.decay_r == -0.5
    report = check_conditions(p1_params)
    assert report.conditions == frozenset({"P1", "P3"})


def test_p1_key_inequality(p1_params):
    # the vanishing-viscosity error estimate needs 1 + eps_star - 2 iota < -1
    dc = derive_constants(p1_params)
    assert dc.eps_star + 1.0 - 2.0 * dc.iota == pytest.approx(-2.1, rel=REL)
    assert dc.eps_star + 1.0 - 2.0 * dc.iota < -1.0


def test_proof_variant_caps(p1_params):
    dc = derive_constants(p1_params, proof_variant=True)
    assert dc.eps_star == pytest.approx(0.05, rel=REL)
    assert dc.eta_star == pytest.approx(0.05, rel=REL)
    assert dc.iota == pytest.approx(1.9, rel=REL)
    # everything not touched by the caps agrees with the statement variant
    base = derive_constants(p1_params)
    assert dc.m1 == base.m1
    assert dc.m2 == base.m2
    assert dc.m3 == base.m3
    assert dc.b_star == base.b_star
    assert dc.d_star == base.d_star


def test_certify_p1_accepts_admissible(p1_params):
    dc = certify_p1(p1_params)
    assert 1.0 < dc.iota < 2.0
    dc = certify_p1(p1_params, proof_variant=True)
    assert dc.iota == pytest.approx(1.9, rel=REL)


def test_certify_p1_rejects_p4_set(p4_params):
    with pytest.raises(PreconditionError, match="P1"):
        certify_p1(p4_params)


def test_p2_detection_with_tolerance():
    crit = ModelParameters(gamma=1.4, delta=2.0, alpha=1.0, beta=-2.0 / 3.0)
    assert check_conditions(crit).p2
    off = ModelParameters(gamma=1.4, delta=2.0, alpha=1.0, beta=-0.6)
    assert not check_conditions(off).p2


def test_symmetrization_scales(p1_params):
    assert p1_params.sound_scale == pytest.approx(math.sqrt(8.0), rel=REL)
    assert p1_params.sound_exponent == 0.5
    assert p1_params.visc_exponent == 1.0
    assert p1_params.consistency_exponent == pytest.approx(2.0, rel=REL)
    assert p1_params.consistency_coeff == pytest.approx(1.0 / 8.0, rel=REL)


def test_with_epsilon_preserves_everything_else(p1_params):
    inviscid = p1_params.with_epsilon(0.0)
    assert inviscid.epsilon == 0.0
    assert inviscid.gamma == p1_params.gamma
    assert inviscid.beta == p1_params.beta
    assert inviscid.kappa == p1_params.kappa


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(gamma=1.0, delta=2.0, alpha=1.0, beta=0.0),
        dict(gamma=2.0, delta=1.0, alpha=1.0, beta=0.0),
        dict(gamma=2.0, delta=2.0, alpha=0.0, beta=0.0),
        dict(gamma=2.0, delta=2.0, alpha=1.0, beta=-1.0),
        dict(gamma=2.0, delta=2.0, alpha=1.0, beta=0.0, pressure_coeff=0.0),
        dict(gamma=2.0, delta=2.0, alpha=1.0, beta=0.0, epsilon=-0.1),
        dict(gamma=2.0, delta=2.0, alpha=1.0, beta=0.0, epsilon=1.5),
        dict(gamma=2.0, delta=2.0, alpha=1.0, beta=0.0, kappa=0.0),
    ],
)
def test_validate_rejects_bad_parameters(kwargs):
    with pytest.raises(PreconditionError):
        ModelParameters(**kwargs).validate()


admissible_params = st.builds(
    ModelParameters,
    gamma=st.floats(1.05, 3.0),
    delta=st.floats(1.05, 4.0),
    alpha=st.floats(0.1, 2.0),
    beta=st.floats(0.0, 1.0),
).map(
    # fold beta into [-2 alpha/3, alpha] so the shear-bulk combination
    # stays nonnegative for every draw
    lambda p: ModelParameters(
        gamma=p.gamma,
        delta=p.delta,
        alpha=p.alpha,
        beta=-2.0 * p.alpha / 3.0 + p.beta * (p.alpha + 2.0 * p.alpha / 3.0),
    )
)


@given(admissible_params)
def test_derived_identities(params):
    dc = derive_constants(params)
    scale = 1.0 + abs(dc.m3)
    assert abs(dc.m2 - (-3.0 * params.delta + 1.0 + 0.5 * dc.m3)) <= 1e-12 * scale
    assert dc.m4 == pytest.approx(dc.eps_star + dc.m2, rel=1e-12, abs=1e-12)
    assert dc.iota == pytest.approx(
        (1.0 - dc.eta_star) * dc.b_star, rel=1e-12, abs=1e-12
    )
    # d_star = (3/2)delta - M3/4 agrees with the closed form (1 - M2)/2
    assert dc.d_star == pytest.approx(0.5 * (1.0 - dc.m2), rel=1e-10, abs=1e-10)


@given(admissible_params)
def test_caps_bound_the_starred_quantities(params):
    dc = derive_constants(params)
    proof = derive_constants(params, proof_variant=True)
    assert dc.eps_star <= 0.5 * 1.0 + 1e-15
    assert proof.eps_star <= 0.5 * 0.1 + 1e-15
    assert dc.eta_star <= 0.1 + 1e-15
    assert proof.eta_star <= 0.05 + 1e-15
    assert proof.eps_star <= dc.eps_star + 1e-15
    assert proof.eta_star <= dc.eta_star + 1e-15
