"""Least-squares estimation from one fully observed tree.

With ``Phi_k = (X_k, 1)`` and parents ``k`` in ``T_{n-1}``, the joint 4x4
normal equations have matrix ``I_2 (x) S`` and split into two independent
simple regressions: ``X_2k`` on ``Phi_k`` gives ``(a_hat, c_hat)`` and
``X_2k+1`` on ``Phi_k`` gives ``(b_hat, d_hat)``. Second-order parameters
regress squared / crossed residuals on ``psi_k = (X_k^2, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import KERNELS
from .errors import SingularDesign

CONDITION_LIMIT = 1e12


def solve_sym_2x2(m, rhs, name):
    """Solve ``m @ sol = rhs`` for a symmetric 2x2 ``m`` by elimination.

    ``rhs`` may be a vector of length 2 or a ``(2, k)`` array. Raises
    :class:`SingularDesign` when the condition number of ``m`` exceeds
    ``CONDITION_LIMIT``.
    """
    p, q, r = float(m[0][0]), float(m[0][1]), float(m[1][1])
    half_gap = math.hypot(0.5 * (p - r), q)
    lam_max = 0.5 * (p + r) + half_gap
    det = p * r - q * q
    if not lam_max > 0 or not math.isfinite(lam_max):
        raise SingularDesign(name)
    lam_min = det / lam_max
    if lam_min <= lam_max / CONDITION_LIMIT:
        cond = lam_max / lam_min if lam_min > 0 else float("inf")
        raise SingularDesign(name, cond)
    rhs = np.asarray(rhs, dtype=np.float64)
    return np.array([r * rhs[0] - q * rhs[1], p * rhs[1] - q * rhs[0]]) / det


@dataclass(frozen=True)
class DesignMatrices:
    S: np.ndarray
    Q: np.ndarray
    count: int

    def to_dict(self):
        return {"S": self.S.tolist(), "Q": self.Q.tolist(), "count": self.count}


@dataclass(frozen=True)
class ThetaEstimate:
    a_hat: float
    c_hat: float
    b_hat: float
    d_hat: float
    design: DesignMatrices

    @property
    def vec(self):
        return np.array([self.a_hat, self.c_hat, self.b_hat, self.d_hat])

    def to_dict(self):
        return {"a": self.a_hat, "c": self.c_hat, "b": self.b_hat, "d": self.d_hat}


@dataclass(frozen=True)
class SecondOrderEstimates:
    eta_hat: np.ndarray   # (sigma_a^2, sigma_c^2)
    zeta_hat: np.ndarray  # (sigma_b^2, sigma_d^2)
    nu_hat: np.ndarray    # (rho_ab, rho_cd)

    def to_dict(self):
        return {
            "eta": self.eta_hat.tolist(),
            "zeta": self.zeta_hat.tolist(),
            "nu": self.nu_hat.tolist(),
        }


@dataclass(frozen=True)
class EstimateBundle:
    theta: ThetaEstimate
    second_order: SecondOrderEstimates
    n_generations: int

    def to_dict(self):
        d = self.theta.design
        return {
            "n_generations": self.n_generations,
            "theta": self.theta.to_dict(),
            **self.second_order.to_dict(),
            "S": d.S.tolist(),
            "Q": d.Q.tolist(),
            "count": d.count,
        }


def _require_parents(tree):
    if tree.n_generations < 1:
        raise ValueError("estimation needs a tree with at least one generation of children")
    return tree.n_parents


def _s_matrix(sums):
    n, x, x2 = sums[0], sums[1], sums[2]
    return np.array([[x2, x], [x, n]])


def _q_matrix(n, x2, x4):
    return np.array([[x4, x2], [x2, n]])


def design_matrices(tree, kernels=None):
    """``S = sum Phi Phi^T`` and ``Q = sum psi psi^T`` over parents ``T_{n-1}``."""
    n_par = _require_parents(tree)
    sums = (kernels or KERNELS).parent_sums(tree.values, n_par)
    return DesignMatrices(_s_matrix(sums), _q_matrix(sums[0], sums[2], sums[4]), n_par)


def theta_from_sums(sums):
    """``(a, c, b, d)`` from a row laid out as ``_kernels.SUM_FIELDS``."""
    rhs = np.array([[sums[7], sums[8]], [sums[5], sums[6]]])
    sol = solve_sym_2x2(_s_matrix(sums), rhs, "S")
    return np.array([sol[0, 0], sol[1, 0], sol[0, 1], sol[1, 1]])


def estimate_theta(tree, kernels=None):
    n_par = _require_parents(tree)
    sums = (kernels or KERNELS).parent_sums(tree.values, n_par)
    a, c, b, d = theta_from_sums(sums)
    design = DesignMatrices(_s_matrix(sums), _q_matrix(sums[0], sums[2], sums[4]), n_par)
    return ThetaEstimate(float(a), float(c), float(b), float(d), design)


def residuals(tree, theta):
    """Residual arrays ``(V_hat_2k, V_hat_2k+1)`` for parents ``k`` in order."""
    n_par = _require_parents(tree)
    v = tree.values
    x = v[:n_par]
    even = v[1 : 2 * n_par : 2] - theta.a_hat * x - theta.c_hat
    odd = v[2 : 2 * n_par + 1 : 2] - theta.b_hat * x - theta.d_hat
    return even, odd


def second_order_from_sums(n_parents, so):
    """Solve the three ``Q``-weighted systems from ``second_order_sums`` output."""
    q = _q_matrix(n_parents, so[0], so[1])
    rhs = np.array([[so[2], so[4], so[6]], [so[3], so[5], so[7]]])
    sol = solve_sym_2x2(q, rhs, "Q")
    return SecondOrderEstimates(sol[:, 0].copy(), sol[:, 1].copy(), sol[:, 2].copy())


def estimate_second_order(tree, theta, kernels=None):
    n_par = _require_parents(tree)
    so = (kernels or KERNELS).second_order_sums(
        tree.values, n_par, theta.a_hat, theta.c_hat, theta.b_hat, theta.d_hat
    )
    return second_order_from_sums(n_par, so)


def estimate_all(tree, kernels=None):
    theta = estimate_theta(tree, kernels)
    return EstimateBundle(theta, estimate_second_order(tree, theta, kernels), tree.n_generations)


def empirical_moment(tree, p, kernels=None):
    """Tree average ``(1/|T_n|) sum_{k in T_n} X_k^p`` for ``p`` in 1..8."""
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= 8):
        raise ValueError(f"p must be an integer in 1..8, got {p!r}")
    sums = (kernels or KERNELS).power_sums(tree.values, int(p))
    return float(sums[p] / sums[0])


def cumulative_generation_sums(tree, kernels=None):
    """Row ``k - 1`` holds the parent sums over ``T_{k-1}``, for ``k = 1..n``."""
    _require_parents(tree)
    per_gen = (kernels or KERNELS).generation_sums(tree.values, tree.n_generations)
    return np.cumsum(per_gen, axis=0)


def theta_path(tree, kernels=None):
    """``theta_hat_k`` for every ``k = 1..n`` from one pass over the tree.

    Returns an ``(n, 4)`` array; rows whose design ``S_{k-1}`` is singular are
    NaN (row 0, a single parent, always is).
    """
    cum = cumulative_generation_sums(tree, kernels)
    out = np.full((cum.shape[0], 4), np.nan)
    for i, row in enumerate(cum):
        try:
            out[i] = theta_from_sums(row)
        except SingularDesign:
            pass
    return out
