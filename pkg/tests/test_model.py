import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rcbar.model import (
    BivariateGaussian,
    ConstantInitial,
    Degenerate,
    GaussianInitial,
    IndependentUniform,
    ModelSpec,
    central_pair_moments,
    derive_moment_set,
    raw_moment,
    validate_hypotheses,
)
from rcbar.simulate import RngStream, pairs_from_uniforms

from conftest import random_valid_specs, reference_spec, valid_specs


# ------------------------------------------------------------ raw moments

def test_standard_normal_fourth_moment():
    assert raw_moment(BivariateGaussian(0, 0, 1, 1, 0), "x", 4) == 3.0


def test_uniform_sixteenth_moment():
    v = raw_moment(IndependentUniform(0, 0.9, 0, 1), "x", 16)
    assert v == pytest.approx(0.9**16 / 17, rel=1e-14)
    assert v == pytest.approx(0.010900, abs=5e-7)


def test_degenerate_sixteenth_moment():
    assert raw_moment(Degenerate(0.5, 0.5), "y", 16) == 2.0**-16


@pytest.mark.parametrize("mean, sd", [(0.0, 1.0), (1.0, 1.0), (0.4, 0.2), (-1.5, 0.7), (2.0, 0.0)])
@pytest.mark.parametrize("p", range(1, 17))
def test_gaussian_raw_moment_matches_quadrature(mean, sd, p):
    # Gauss-Hermite (probabilists') quadrature is exact for polynomials of degree < 2*deg
    nodes, weights = np.polynomial.hermite_e.hermegauss(20)
    expected = np.sum(weights * (mean + sd * nodes) ** p) / math.sqrt(2 * math.pi)
    got = raw_moment(BivariateGaussian(mean, 0.0, sd, 1.0, 0.0), "x", p)
    assert got == pytest.approx(expected, rel=1e-11, abs=1e-10)


@pytest.mark.parametrize("lo, hi", [(0.0, 1.0), (-0.3, 0.2), (1.0, 3.0)])
@pytest.mark.parametrize("p", [1, 2, 5, 16])
def test_uniform_raw_moment_matches_quadrature(lo, hi, p):
    nodes, weights = np.polynomial.legendre.leggauss(12)
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    expected = 0.5 * np.sum(weights * x**p)
    assert raw_moment(IndependentUniform(lo, hi, 0, 1), "x", p) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("p", [0, 17, 2.0])
def test_raw_moment_order_domain(p):
    with pytest.raises(ValueError):
        raw_moment(Degenerate(1, 1), "x", p)


def test_raw_moment_marginal_domain():
    with pytest.raises(ValueError):
        raw_moment(Degenerate(1, 1), "z", 2)


@pytest.mark.parametrize(
    "law",
    [
        BivariateGaussian(0.4, -0.2, 0.3, 0.5, 0.6),
        IndependentUniform(-0.5, 0.8, 0.1, 0.4),
        Degenerate(0.7, -0.3),
    ],
    ids=["gaussian", "uniform", "degenerate"],
)
def test_raw_moments_match_monte_carlo(law):
    rng = RngStream(20240601)
    draws = pairs_from_uniforms(law, rng.uniforms(2 * 10**6).reshape(-1, 2))
    for j, marginal in enumerate("xy"):
        z = draws[:, j]
        zp = np.ones_like(z)
        for p in range(1, 17):
            zp = zp * z
            sem = zp.std(ddof=1) / math.sqrt(z.size)
            exact = raw_moment(law, marginal, p)
            assert abs(zp.mean() - exact) <= 5 * sem + 1e-12 * abs(exact), (marginal, p)


# ------------------------------------------------------------ central moments

def test_gaussian_isserlis():
    sd, corr = 0.7, -0.4
    *_, nu2 = central_pair_moments(BivariateGaussian(0, 0, sd, sd, corr))
    assert nu2 == pytest.approx(sd**4 * (1 + 2 * corr**2), rel=1e-15)


def test_degenerate_central_moments_vanish():
    assert central_pair_moments(Degenerate(0.5, 0.5)) == (0.0,) * 6


def test_uniform_unit_width_central_moments():
    vx, vy, rho, mx, my, nu2 = central_pair_moments(IndependentUniform(0, 1, 2, 3))
    assert (vx, vy, rho) == pytest.approx((1 / 12, 1 / 12, 0.0), rel=1e-15)
    assert (mx, my) == pytest.approx((1 / 80, 1 / 80), rel=1e-15)
    assert nu2 == pytest.approx(1 / 144, rel=1e-15)


def test_correlation_dropped_when_sd_is_zero():
    assert BivariateGaussian(0, 0, 0.0, 1.0, 0.8).corr == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(sd_x=-1.0), dict(corr=1.5), dict(mean_x=math.inf)],
)
def test_gaussian_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        BivariateGaussian(**kwargs)


def test_uniform_rejects_empty_interval():
    with pytest.raises(ValueError):
        IndependentUniform(1.0, 1.0, 0.0, 1.0)


# ------------------------------------------------------------ moment set

def test_reference_moment_set():
    m = derive_moment_set(reference_spec())
    assert (m.a, m.b, m.c, m.d) == (0.5, 0.5, 1.0, 1.0)
    assert (m.sigma_a2, m.sigma_b2, m.sigma_c2, m.sigma_d2) == (0.0, 0.0, 1.0, 1.0)
    assert (m.rho_ab, m.rho_cd) == (0.0, 0.0)
    assert (m.mu_c4, m.mu_d4) == (3.0, 3.0)


def test_gaussian_coefficient_cross_moments():
    m = derive_moment_set(ModelSpec(BivariateGaussian(0.4, 0.4, 0.2, 0.2, 0.5), Degenerate(1, 1)))
    assert m.rho_ab == pytest.approx(0.02, rel=1e-14)
    assert m.nu_ab2 == pytest.approx(0.0024, rel=1e-14)


@given(valid_specs())
def test_moment_set_invariants(spec):
    m = derive_moment_set(spec)
    for raw, mean, var in (
        (m.raw_a, m.a, m.sigma_a2),
        (m.raw_b, m.b, m.sigma_b2),
        (m.raw_c, m.c, m.sigma_c2),
        (m.raw_d, m.d, m.sigma_d2),
    ):
        assert len(raw) == 17 and raw[0] == 1.0
        assert raw[1] == pytest.approx(mean, abs=1e-15)
        assert raw[2] == pytest.approx(var + mean**2, rel=1e-12, abs=1e-15)
    assert m.rho_ab**2 <= m.sigma_a2 * m.sigma_b2
    assert m.rho_cd**2 <= m.sigma_c2 * m.sigma_d2
    for mu4, s2 in ((m.mu_a4, m.sigma_a2), (m.mu_b4, m.sigma_b2), (m.mu_c4, m.sigma_c2), (m.mu_d4, m.sigma_d2)):
        assert mu4 >= s2**2


def test_initial_laws():
    assert ConstantInitial(2.5).from_uniform(0.3) == 2.5
    assert ConstantInitial(2.0).raw_moment(3) == 8.0
    g = GaussianInitial(1.0, 2.0)
    assert g.from_uniform(0.5) == 1.0
    assert g.raw_moment(2) == 5.0


def test_spec_theta_order():
    spec = ModelSpec(Degenerate(0.1, 0.2), BivariateGaussian(3.0, 4.0, 1, 1, 0))
    assert spec.theta.tolist() == [0.1, 3.0, 0.2, 4.0]


# ------------------------------------------------------------ hypotheses

def test_reference_passes_every_gate():
    r = validate_hypotheses(derive_moment_set(reference_spec()))
    assert r.can_simulate and r.theory_valid_for_consistency and r.theory_valid_for_clt
    assert r["H.5"].detail.startswith("satisfied by family")


def test_wide_gaussian_coefficients_fail_h1():
    m = derive_moment_set(ModelSpec(BivariateGaussian(0.5, 0.5, 0.5, 0.5, 0), reference_spec().noise_law))
    assert m.raw_a[16] > 30
    r = validate_hypotheses(m)
    assert not r["H.1"].passed
    assert not r.theory_valid_for_clt


def test_degenerate_noise_fails_h2():
    r = validate_hypotheses(derive_moment_set(ModelSpec(Degenerate(0.5, 0.5), Degenerate(1, 1))))
    assert not r["H.2"].passed
    assert not r.theory_valid_for_consistency
    assert r.can_simulate


def test_h3_asymmetry():
    # perfectly correlated coefficients satisfy the non-strict bound
    coeff_ok = validate_hypotheses(
        derive_moment_set(ModelSpec(BivariateGaussian(0.3, 0.3, 0.1, 0.1, 1.0), reference_spec().noise_law))
    )
    assert coeff_ok["H.3"].passed
    # perfectly correlated noise violates the strict one
    noise_bad = validate_hypotheses(
        derive_moment_set(ModelSpec(Degenerate(0.3, 0.3), BivariateGaussian(1, 1, 1, 1, 1.0)))
    )
    assert not noise_bad["H.3"].passed


def test_consistency_gate_uses_eighth_moments():
    # E[a^8] < 1 <= E[a^16]
    spec = ModelSpec(BivariateGaussian(0.5, 0.5, 0.3, 0.3, 0), reference_spec().noise_law)
    m = derive_moment_set(spec)
    assert m.raw_a[8] < 1 <= m.raw_a[16]
    r = validate_hypotheses(m)
    assert r.theory_valid_for_consistency and not r.theory_valid_for_clt


@given(st.floats(0.3, 0.9), st.floats(0.0, 0.6), st.floats(0.0, 0.4))
def test_h1_monotone_in_sd(mean, sd, bump):
    noise = reference_spec().noise_law

    def h1(s):
        return validate_hypotheses(derive_moment_set(ModelSpec(BivariateGaussian(mean, mean, s, s, 0), noise)))["H.1"].passed

    if not h1(sd):
        assert not h1(sd + bump)


def test_report_lines_and_gates():
    r = validate_hypotheses(derive_moment_set(ModelSpec(Degenerate(1.2, 0.5), Degenerate(1, 1))))
    lines = r.lines()
    assert lines[0].startswith("FAIL H.1:")
    assert "theory_valid_for_clt: False" in lines
    assert r.failed_names("consistency") == ["H.1'", "H.2", "H.3"]
    with pytest.raises(ValueError):
        r.gate("bogus")


def test_random_valid_specs_are_valid():
    for spec in random_valid_specs(100, 7):
        assert validate_hypotheses(derive_moment_set(spec)).theory_valid_for_clt
