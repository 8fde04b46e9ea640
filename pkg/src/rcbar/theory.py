"""Closed-form limits: tree moments ``s_p`` and the asymptotic matrices.

``s_p`` is the almost sure limit of ``(1/|T_n|) sum X_k^p``. Conditioning
each child on its parent gives the linear recursion

    s_p = 2 / (2 - (A_p + B_p)) * ( sum_{k=1}^{p-1} 1/2 C(p,k) (A_k C_{p-k} + B_k D_{p-k}) s_k
                                    + (C_p + D_p) / 2 )

with ``A_p = E[a^p]``, ``B_p = E[b^p]``, ``C_p = E[eps_even^p]`` and
``D_p = E[eps_odd^p]``.

Matrix index convention: 4x4 matrices act on ``vec(theta) = (a, c, b, d)``,
i.e. ``(even, odd) (x) (slope, intercept)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NotPositiveDefinite, UnstableMoment

S_MAX_ORDER = 8
_RATIONAL_DENOMINATOR_LIMIT = 10**6


def _rationalize(values):
    out = []
    for v in values:
        fr = Fraction(v).limit_denominator(_RATIONAL_DENOMINATOR_LIMIT)
        if float(fr) != v:
            return None
        out.append(fr)
    return out


def _recursion(A, B, C, D, p_max, one):
    s = [one]
    for p in range(1, p_max + 1):
        denom = 2 - (A[p] + B[p])
        if not denom > 0:
            raise UnstableMoment(f"A_{p} + B_{p} = {float(A[p] + B[p]):.6g} >= 2; s_{p} does not exist")
        acc = (C[p] + D[p]) / 2
        for k in range(1, p):
            acc += one * math.comb(p, k) / 2 * (A[k] * C[p - k] + B[k] * D[p - k]) * s[k]
        s.append(2 / denom * acc)
    return s


def s_moments_exact(m, p_max=S_MAX_ORDER):
    """``s_0..s_p_max`` as :class:`fractions.Fraction`, or ``None`` when some
    raw moment is not a ratio of small integers."""
    _check_p_max(p_max)
    tables = [_rationalize(t[: p_max + 1]) for t in (m.raw_a, m.raw_b, m.raw_c, m.raw_d)]
    if any(t is None for t in tables):
        return None
    return _recursion(*tables, p_max, Fraction(1))


def s_moments(m, p_max=S_MAX_ORDER):
    """Tree-moment limits ``s`` as an array of length ``p_max + 1``; ``s[0] = 1``.

    Evaluated in exact rational arithmetic when every raw moment involved is
    a ratio of small integers, in double precision otherwise.

    Raises
    ------
    UnstableMoment
        If ``A_p + B_p >= 2`` for some ``p <= p_max``.
    """
    exact = s_moments_exact(m, p_max)
    if exact is not None:
        return np.array([float(v) for v in exact])
    tables = [tuple(float(v) for v in t[: p_max + 1]) for t in (m.raw_a, m.raw_b, m.raw_c, m.raw_d)]
    return np.array(_recursion(*tables, p_max, 1.0))


def _check_p_max(p_max):
    if not 1 <= p_max <= S_MAX_ORDER:
        raise ValueError(f"p_max must lie in 1..{S_MAX_ORDER}, got {p_max}")


def _hankel(s, i):
    """``[[s_{i+4}, s_{i+2}], [s_{i+2}, s_i]]``."""
    return np.array([[s[i + 4], s[i + 2]], [s[i + 2], s[i]]])


def _require_pd(mat, name):
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite: {mat.tolist()}") from exc


def _inv_2x2(m):
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def inv_sqrt_spd_2x2(m):
    """``m^(-1/2)`` for a symmetric positive definite 2x2 matrix.

    Uses ``sqrt(m) = (m + sqrt(det) I) / sqrt(tr + 2 sqrt(det))``.
    """
    det = m[0, 0] * m[1, 1] - m[0, 1] ** 2
    root_det = math.sqrt(det)
    root = (m + root_det * np.eye(2)) / math.sqrt(m[0, 0] + m[1, 1] + 2.0 * root_det)
    return _inv_2x2(root)


def l_matrix(m, s):
    """``N_cd (x) C + N_ab (x) D``."""
    n_cd = np.array([[m.sigma_c2, m.rho_cd], [m.rho_cd, m.sigma_d2]])
    n_ab = np.array([[m.sigma_a2, m.rho_ab], [m.rho_ab, m.sigma_b2]])
    c = np.array([[s[2], s[1]], [s[1], 1.0]])
    d = np.array([[s[4], s[3]], [s[3], s[2]]])
    return np.kron(n_cd, c) + np.kron(n_ab, d)


@dataclass(frozen=True)
class LimitMatrices:
    s: np.ndarray
    C: np.ndarray
    D: np.ndarray
    A: np.ndarray
    L: np.ndarray
    Gamma: np.ndarray
    Lambda: np.ndarray
    M_ac: np.ndarray
    M_bd: np.ndarray
    H: np.ndarray
    clt_cov_theta: np.ndarray
    clt_cov_eta: np.ndarray
    clt_cov_zeta: np.ndarray
    clt_cov_nu: np.ndarray
    Lambda_inv_sqrt: np.ndarray
    qsl_limit: float
    # limit of the Lambda-weighted quadratic form: tr(Lambda Gamma^-1 L Gamma^-1)
    qsl_lambda_weighted_limit: float
    s_exact: tuple = None

    def to_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if isinstance(v, np.ndarray):
                out[name] = v.tolist()
            elif name == "s_exact":
                out[name] = None if v is None else [str(x) for x in v]
            else:
                out[name] = v
        return out


def limit_matrices(m):
    """Every asymptotic matrix for the model with moments ``m``.

    Raises
    ------
    UnstableMoment
        If some ``s_p``, ``p <= 8``, does not exist.
    NotPositiveDefinite
        If ``C``, ``A`` or ``C + D`` cannot be inverted.
    """
    exact = s_moments_exact(m, S_MAX_ORDER)
    s = np.array([float(v) for v in exact]) if exact is not None else s_moments(m, S_MAX_ORDER)

    c = np.array([[s[2], s[1]], [s[1], 1.0]])
    d = np.array([[s[4], s[3]], [s[3], s[2]]])
    a = np.array([[s[4], s[2]], [s[2], 1.0]])
    _require_pd(c, "C")
    _require_pd(a, "A")
    _require_pd(c + d, "C + D")

    eye = np.eye(2)
    big_l = l_matrix(m, s)
    gamma = np.kron(eye, c)
    lam = np.kron(eye, c + d)
    c_inv = _inv_2x2(c)
    gamma_inv = np.kron(eye, c_inv)
    cov_theta = gamma_inv @ big_l @ gamma_inv

    m_ac = (
        (m.mu_a4 - m.sigma_a2**2) * _hankel(s, 4)
        + 4.0 * m.sigma_a2 * m.sigma_c2 * _hankel(s, 2)
        + (m.mu_c4 - m.sigma_c2**2) * _hankel(s, 0)
    )
    m_bd = (
        (m.mu_b4 - m.sigma_b2**2) * _hankel(s, 4)
        + 4.0 * m.sigma_b2 * m.sigma_d2 * _hankel(s, 2)
        + (m.mu_d4 - m.sigma_d2**2) * _hankel(s, 0)
    )
    h = (
        (m.nu_ab2 - m.rho_ab**2) * _hankel(s, 4)
        + (m.sigma_a2 * m.sigma_d2 + m.sigma_b2 * m.sigma_c2 + 2.0 * m.rho_ab * m.rho_cd) * _hankel(s, 2)
        + (m.nu_cd2 - m.rho_cd**2) * _hankel(s, 0)
    )
    a_inv = _inv_2x2(a)

    lam_inv_sqrt = np.kron(eye, inv_sqrt_spd_2x2(c + d))
    qsl = float(np.trace(lam_inv_sqrt @ big_l @ lam_inv_sqrt))

    return LimitMatrices(
        s=s, C=c, D=d, A=a, L=big_l, Gamma=gamma, Lambda=lam,
        M_ac=m_ac, M_bd=m_bd, H=h,
        clt_cov_theta=cov_theta,
        clt_cov_eta=a_inv @ m_ac @ a_inv,
        clt_cov_zeta=a_inv @ m_bd @ a_inv,
        clt_cov_nu=a_inv @ h @ a_inv,
        Lambda_inv_sqrt=lam_inv_sqrt,
        qsl_limit=qsl,
        qsl_lambda_weighted_limit=float(np.trace(lam @ cov_theta)),
        s_exact=None if exact is None else tuple(exact),
    )


def conditional_noise_moments(m, x):
    """``(P, Q, R)``: conditional second moments of ``(V_2k, V_2k+1)`` given ``X_k = x``."""
    x2 = x * x
    return (
        m.sigma_a2 * x2 + m.sigma_c2,
        m.rho_ab * x2 + m.rho_cd,
        m.sigma_b2 * x2 + m.sigma_d2,
    )
