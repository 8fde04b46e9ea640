"""Generative model description, closed-form moments and hypothesis checks.

Three pair-law families are supported. Each one has every moment in closed
form, which keeps :mod:`rcbar.theory` exact:

* :class:`BivariateGaussian` -- correlated Gaussian pair,
* :class:`IndependentUniform` -- two independent uniform marginals,
* :class:`Degenerate` -- a constant pair.

A law draws one pair from two uniform deviates in ``(0, 1)`` (see
:meth:`BivariateGaussian.from_uniforms`), which is what the simulator feeds it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import ndtri

MAX_MOMENT_ORDER = 16


def _check_order(p):
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= MAX_MOMENT_ORDER):
        raise ValueError(f"moment order must be an integer in 1..{MAX_MOMENT_ORDER}, got {p!r}")


def _double_factorial_odd(m):
    # (m)!! for odd m >= -1
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def gaussian_raw_moment(mean, sd, p):
    """E[(mean + sd Z)^p] for standard normal Z, by binomial expansion."""
    total = 0.0
    for j in range(0, p + 1, 2):
        total += math.comb(p, j) * mean ** (p - j) * sd**j * _double_factorial_odd(j - 1)
    return total


@dataclass(frozen=True)
class BivariateGaussian:
    mean_x: float = 0.0
    mean_y: float = 0.0
    sd_x: float = 1.0
    sd_y: float = 1.0
    corr: float = 0.0

    kind = "bivariate_gaussian"

    def __post_init__(self):
        for name in ("mean_x", "mean_y", "sd_x", "sd_y", "corr"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.sd_x < 0 or self.sd_y < 0:
            raise ValueError("standard deviations must be >= 0")
        if abs(self.corr) > 1:
            raise ValueError(f"corr must lie in [-1, 1], got {self.corr}")
        if self.sd_x == 0 or self.sd_y == 0:
            object.__setattr__(self, "corr", 0.0)

    @property
    def means(self):
        return self.mean_x, self.mean_y

    def raw_moment(self, marginal, p):
        if marginal == "x":
            return gaussian_raw_moment(self.mean_x, self.sd_x, p)
        return gaussian_raw_moment(self.mean_y, self.sd_y, p)

    def central_moments(self):
        vx, vy = self.sd_x**2, self.sd_y**2
        rho = self.corr * self.sd_x * self.sd_y
        # Isserlis: E[X^2 Y^2] = vx vy + 2 cov^2 for centred Gaussians
        nu2 = vx * vy * (1.0 + 2.0 * self.corr**2)
        return vx, vy, rho, 3.0 * vx**2, 3.0 * vy**2, nu2

    def from_uniforms(self, u1, u2):
        """Map uniforms to a pair through the 2x2 Cholesky factor."""
        z1 = ndtri(u1)
        z2 = ndtri(u2)
        x = self.mean_x + self.sd_x * z1
        y = self.mean_y + self.sd_y * (self.corr * z1 + math.sqrt(1.0 - self.corr**2) * z2)
        return x, y

    def to_dict(self):
        return {
            "kind": self.kind,
            "mean_x": self.mean_x,
            "mean_y": self.mean_y,
            "sd_x": self.sd_x,
            "sd_y": self.sd_y,
            "corr": self.corr,
        }


@dataclass(frozen=True)
class IndependentUniform:
    lo_x: float = 0.0
    hi_x: float = 1.0
    lo_y: float = 0.0
    hi_y: float = 1.0

    kind = "independent_uniform"

    def __post_init__(self):
        for name in ("lo_x", "hi_x", "lo_y", "hi_y"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not (self.lo_x < self.hi_x and self.lo_y < self.hi_y):
            raise ValueError("uniform marginals need lo < hi")

    @property
    def means(self):
        return 0.5 * (self.lo_x + self.hi_x), 0.5 * (self.lo_y + self.hi_y)

    def raw_moment(self, marginal, p):
        lo, hi = (self.lo_x, self.hi_x) if marginal == "x" else (self.lo_y, self.hi_y)
        return (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo))

    def central_moments(self):
        wx, wy = self.hi_x - self.lo_x, self.hi_y - self.lo_y
        vx, vy = wx**2 / 12.0, wy**2 / 12.0
        return vx, vy, 0.0, wx**4 / 80.0, wy**4 / 80.0, vx * vy

    def from_uniforms(self, u1, u2):
        x = self.lo_x + (self.hi_x - self.lo_x) * u1
        y = self.lo_y + (self.hi_y - self.lo_y) * u2
        return x, y

    def to_dict(self):
        return {
            "kind": self.kind,
            "lo_x": self.lo_x,
            "hi_x": self.hi_x,
            "lo_y": self.lo_y,
            "hi_y": self.hi_y,
        }


@dataclass(frozen=True)
class Degenerate:
    value_x: float = 0.0
    value_y: float = 0.0

    kind = "degenerate"

    def __post_init__(self):
        for name in ("value_x", "value_y"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def means(self):
        return self.value_x, self.value_y

    def raw_moment(self, marginal, p):
        return (self.value_x if marginal == "x" else self.value_y) ** p

    def central_moments(self):
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0

    def from_uniforms(self, u1, u2):
        # uniforms are consumed but ignored so every law advances the stream equally
        return (
            np.full(np.shape(u1), self.value_x)[()],
            np.full(np.shape(u2), self.value_y)[()],
        )

    def to_dict(self):
        return {"kind": self.kind, "value_x": self.value_x, "value_y": self.value_y}


PairLaw = Union[BivariateGaussian, IndependentUniform, Degenerate]

PAIR_LAW_KINDS = {cls.kind: cls for cls in (BivariateGaussian, IndependentUniform, Degenerate)}


@dataclass(frozen=True)
class ConstantInitial:
    x_1: float = 1.0

    kind = "constant"

    def from_uniform(self, u):
        return self.x_1

    def raw_moment(self, p):
        return self.x_1**p

    def to_dict(self):
        return {"kind": self.kind, "x_1": float(self.x_1)}


@dataclass(frozen=True)
class GaussianInitial:
    mean: float = 0.0
    sd: float = 1.0

    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd)) or self.sd < 0:
            raise ValueError("initial Gaussian needs finite mean and sd >= 0")

    def from_uniform(self, u):
        return float(self.mean + self.sd * ndtri(u))

    def raw_moment(self, p):
        return gaussian_raw_moment(self.mean, self.sd, p)

    def to_dict(self):
        return {"kind": self.kind, "mean": float(self.mean), "sd": float(self.sd)}


Initial = Union[ConstantInitial, GaussianInitial]

INITIAL_KINDS = {cls.kind: cls for cls in (ConstantInitial, GaussianInitial)}


@dataclass(frozen=True)
class ModelSpec:
    """Law of the coefficient pair ``(a_n, b_n)``, of the noise pair
    ``(eps_2n, eps_2n+1)`` and of the ancestor ``X_1``."""

    coeff_law: PairLaw
    noise_law: PairLaw
    initial: Initial = field(default_factory=ConstantInitial)

    def to_dict(self):
        return {
            "coeff_law": self.coeff_law.to_dict(),
            "noise_law": self.noise_law.to_dict(),
            "initial": self.initial.to_dict(),
        }

    @property
    def theta(self):
        """True parameter in vec order ``(a, c, b, d)``."""
        a, b = self.coeff_law.means
        c, d = self.noise_law.means
        return np.array([a, c, b, d])


def raw_moment(law, marginal, p):
    """Exact raw moment ``E[Z^p]`` of one marginal of a pair law.

    Parameters
    ----------
    law : PairLaw
    marginal : {"x", "y"}
    p : int
        Order, 1..16.
    """
    _check_order(p)
    if marginal not in ("x", "y"):
        raise ValueError(f"marginal must be 'x' or 'y', got {marginal!r}")
    return float(law.raw_moment(marginal, p))


def central_pair_moments(law):
    """Return ``(sigma2_x, sigma2_y, rho, mu4_x, mu4_y, nu2)`` of a pair law.

    ``rho`` is the covariance and ``nu2`` is ``E[(X-EX)^2 (Y-EY)^2]``.
    """
    return tuple(float(v) for v in law.central_moments())


@dataclass(frozen=True)
class MomentSet:
    a: float
    b: float
    c: float
    d: float
    sigma_a2: float
    sigma_b2: float
    sigma_c2: float
    sigma_d2: float
    rho_ab: float
    rho_cd: float
    mu_a4: float
    mu_b4: float
    mu_c4: float
    mu_d4: float
    nu_ab2: float
    nu_cd2: float
    # index p holds E[Z^p]; index 0 is 1
    raw_a: tuple
    raw_b: tuple
    raw_c: tuple
    raw_d: tuple
    families: tuple = ()

    def to_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            out[name] = list(v) if isinstance(v, tuple) else v
        return out


def _raw_table(law, marginal):
    return (1.0,) + tuple(raw_moment(law, marginal, p) for p in range(1, MAX_MOMENT_ORDER + 1))


def derive_moment_set(spec):
    """Collect every analytic moment of ``spec`` that the theory uses."""
    a, b = spec.coeff_law.means
    c, d = spec.noise_law.means
    sa2, sb2, rab, mua4, mub4, nuab2 = central_pair_moments(spec.coeff_law)
    sc2, sd2, rcd, muc4, mud4, nucd2 = central_pair_moments(spec.noise_law)
    return MomentSet(
        a=a, b=b, c=c, d=d,
        sigma_a2=sa2, sigma_b2=sb2, sigma_c2=sc2, sigma_d2=sd2,
        rho_ab=rab, rho_cd=rcd,
        mu_a4=mua4, mu_b4=mub4, mu_c4=muc4, mu_d4=mud4,
        nu_ab2=nuab2, nu_cd2=nucd2,
        raw_a=_raw_table(spec.coeff_law, "x"),
        raw_b=_raw_table(spec.coeff_law, "y"),
        raw_c=_raw_table(spec.noise_law, "x"),
        raw_d=_raw_table(spec.noise_law, "y"),
        families=(spec.coeff_law.kind, spec.noise_law.kind),
    )


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple

    can_simulate = True

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def _all(self, names):
        return all(self[n].passed for n in names)

    # H.1' is the 8th-moment relaxation that suffices for the almost sure results
    CONSISTENCY = ("H.1'", "H.2", "H.3")
    CLT = ("H.1", "H.2", "H.3", "H.4", "H.5")

    @property
    def theory_valid_for_consistency(self):
        return self._all(self.CONSISTENCY)

    @property
    def theory_valid_for_clt(self):
        return self._all(self.CLT)

    def gate(self, name):
        if name == "consistency":
            return self.theory_valid_for_consistency
        if name == "clt":
            return self.theory_valid_for_clt
        raise ValueError(f"unknown gate {name!r}")

    def failed_names(self, gate=None):
        names = {"consistency": self.CONSISTENCY, "clt": self.CLT}.get(gate)
        return [c.name for c in self.checks if not c.passed and (names is None or c.name in names)]

    def lines(self):
        out = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]
        out.append(f"can_simulate: {self.can_simulate}")
        out.append(f"theory_valid_for_consistency: {self.theory_valid_for_consistency}")
        out.append(f"theory_valid_for_clt: {self.theory_valid_for_clt}")
        return out

    def to_dict(self):
        return {
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "can_simulate": self.can_simulate,
            "theory_valid_for_consistency": self.theory_valid_for_consistency,
            "theory_valid_for_clt": self.theory_valid_for_clt,
        }


def validate_hypotheses(m):
    """Check the moment hypotheses on a :class:`MomentSet`.

    Every check is reported with the numeric value that decided it. All
    supported families have finite moments of every order, so the noise
    16th-moment bound and the alpha-moment condition hold by family.
    """
    ea16, eb16 = m.raw_a[16], m.raw_b[16]
    ea8, eb8 = m.raw_a[8], m.raw_b[8]
    checks = [
        HypothesisCheck(
            "H.1",
            ea16 < 1 and eb16 < 1,
            f"E[a^16]={ea16:.6g}, E[b^16]={eb16:.6g} (need < 1); noise 16th moments finite by family",
        ),
        HypothesisCheck(
            "H.1'",
            ea8 < 1 and eb8 < 1,
            f"E[a^8]={ea8:.6g}, E[b^8]={eb8:.6g} (need < 1)",
        ),
        HypothesisCheck(
            "H.2",
            m.sigma_c2 > 0 and m.sigma_d2 > 0,
            f"sigma_c^2={m.sigma_c2:.6g}, sigma_d^2={m.sigma_d2:.6g} (need > 0)",
        ),
        HypothesisCheck(
            "H.3",
            m.rho_ab**2 <= m.sigma_a2 * m.sigma_b2 and m.rho_cd**2 < m.sigma_c2 * m.sigma_d2,
            f"rho_ab^2={m.rho_ab**2:.6g} <= {m.sigma_a2 * m.sigma_b2:.6g}, "
            f"rho_cd^2={m.rho_cd**2:.6g} < {m.sigma_c2 * m.sigma_d2:.6g}",
        ),
    ]
    ec4, ec2 = m.raw_c[4], m.raw_c[2]
    ed4, ed2 = m.raw_d[4], m.raw_d[2]
    h4 = (
        m.mu_a4 >= m.sigma_a2**2
        and m.mu_b4 >= m.sigma_b2**2
        and m.mu_c4 > m.sigma_c2**2
        and m.mu_d4 > m.sigma_d2**2
        and ec4 > ec2**2
        and ed4 > ed2**2
        and m.nu_ab2 >= m.rho_ab**2
        and m.nu_cd2 > m.rho_cd**2
    )
    checks.append(
        HypothesisCheck(
            "H.4",
            bool(h4),
            f"mu_c^4={m.mu_c4:.6g} vs sigma_c^4={m.sigma_c2**2:.6g}, "
            f"mu_d^4={m.mu_d4:.6g} vs sigma_d^4={m.sigma_d2**2:.6g}, "
            f"E[eps_even^4]={ec4:.6g} vs E[eps_even^2]^2={ec2**2:.6g}, "
            f"E[eps_odd^4]={ed4:.6g} vs E[eps_odd^2]^2={ed2**2:.6g}, "
            f"nu_cd^2={m.nu_cd2:.6g} vs rho_cd^2={m.rho_cd**2:.6g}",
        )
    )
    checks.append(
        HypothesisCheck("H.5", True, "satisfied by family (all moments finite for " + "/".join(m.families) + ")")
    )
    return HypothesisReport(tuple(checks))
