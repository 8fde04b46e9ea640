"""Replicated experiments checking estimator rates, the quadratic strong law
and the four central limit theorems against :mod:`rcbar.theory`.

Replicate ``r`` simulates one tree seeded with ``mix_seed(master_seed, r)``.
Replicates run on a thread pool (``RCBAR_THREADS`` caps its size) and are
reduced in replicate order, so reports do not depend on scheduling.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisGateError, MonteCarloAborted, NotPositiveDefinite, SingularDesign
from .estimate import (
    cumulative_generation_sums,
    estimate_all,
    theta_from_sums,
)
from .model import derive_moment_set, validate_hypotheses
from .simulate import mix_seed, simulate_tree
from .theory import l_matrix, limit_matrices, s_moments
from .tree import subtree_counts

CLT_MODES = ("clt_theta", "clt_eta", "clt_zeta", "clt_nu")
MODES = CLT_MODES + ("qsl", "rate")
DEFAULT_TOL_COV = {"clt_theta": 0.15, "clt_eta": 0.20, "clt_zeta": 0.20, "clt_nu": 0.20}
DEFAULT_LEVEL = 0.01
MAX_FAILED_FRACTION = 0.01
MIN_DISTRIBUTIONAL_REPLICATES = 30
MIN_GENERATIONS = 4
RATE_FIRST_GENERATION = 4


def worker_count():
    env = os.environ.get("RCBAR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    spec: object
    n_generations: int
    replicates: int
    master_seed: int
    mode: str = "clt_theta"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_generations < MIN_GENERATIONS:
            raise ValueError(f"n_generations must be >= {MIN_GENERATIONS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.mode in CLT_MODES and self.replicates < MIN_DISTRIBUTIONAL_REPLICATES:
            raise ValueError(f"distributional tests need >= {MIN_DISTRIBUTIONAL_REPLICATES} replicates")

    def to_dict(self):
        return {
            "model": self.spec.to_dict(),
            "n_generations": self.n_generations,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "mode": self.mode,
        }


def run_replicates(cfg, fn, threads=None):
    """Evaluate ``fn(tree)`` for every replicate, in replicate order.

    ``SingularDesign`` raised by ``fn`` is caught and returned in place of the
    result.
    """

    def one(r):
        tree = simulate_tree(cfg.spec, cfg.n_generations, mix_seed(cfg.master_seed, r))
        try:
            return fn(tree)
        except SingularDesign as exc:
            return exc

    threads = threads or worker_count()
    if threads == 1:
        return [one(r) for r in range(cfg.replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(cfg.replicates)))


def _split_failures(results, cfg, fatal=True):
    ok = [r for r in results if not isinstance(r, SingularDesign)]
    n_failed = len(results) - len(ok)
    if fatal and n_failed > MAX_FAILED_FRACTION * cfg.replicates:
        raise MonteCarloAborted(
            f"{n_failed} of {cfg.replicates} replicates hit a singular design; check the model"
        )
    return ok, n_failed


# ------------------------------------------------------------ statistics

def chi2_cdf(x, dof):
    """CDF of chi-square with even ``dof``, via the closed-form regularised
    incomplete gamma ``1 - exp(-x/2) sum_{j < dof/2} (x/2)^j / j!``."""
    if dof < 2 or dof % 2:
        raise ValueError("closed form only for even degrees of freedom")
    h = 0.5 * np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    term = np.ones_like(h)
    total = np.ones_like(h)
    for j in range(1, dof // 2):
        term = term * h / j
        total = total + term
    return 1.0 - np.exp(-h) * total


def ks_distance(samples, cdf):
    """Kolmogorov-Smirnov distance between the empirical CDF of ``samples``
    and a continuous ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical(n, level=DEFAULT_LEVEL):
    """Asymptotic one-sample KS critical value ``sqrt(-log(level/2)/2)/sqrt(n)``."""
    return math.sqrt(-0.5 * math.log(level / 2.0)) / math.sqrt(n)


def summarize_covariance(samples, reference=None):
    """Unbiased sample covariance of an ``R x p`` array and, when a
    ``reference`` is given, its relative Frobenius error."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an R x p sample array with R >= 2")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    if reference is None:
        return cov, None
    reference = np.asarray(reference, dtype=np.float64)
    return cov, float(np.linalg.norm(cov - reference) / np.linalg.norm(reference))


def mahalanobis_squared(samples, cov):
    """Squared Mahalanobis distances of the rows of ``samples`` under ``cov``."""
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {np.asarray(cov).tolist()}") from exc
    white = np.linalg.solve(chol, np.asarray(samples, dtype=np.float64).T)
    return np.sum(white * white, axis=0)


# ------------------------------------------------------------ CLT

def truth_vector(m, mode):
    if mode == "clt_theta":
        return np.array([m.a, m.c, m.b, m.d])
    if mode == "clt_eta":
        return np.array([m.sigma_a2, m.sigma_c2])
    if mode == "clt_zeta":
        return np.array([m.sigma_b2, m.sigma_d2])
    if mode == "clt_nu":
        return np.array([m.rho_ab, m.rho_cd])
    raise ValueError(f"not a CLT mode: {mode!r}")


def _estimate_for_mode(bundle, mode):
    if mode == "clt_theta":
        return bundle.theta.vec
    so = bundle.second_order
    return {"clt_eta": so.eta_hat, "clt_zeta": so.zeta_hat, "clt_nu": so.nu_hat}[mode]


def theoretical_covariance(limits, mode):
    return {
        "clt_theta": limits.clt_cov_theta,
        "clt_eta": limits.clt_cov_eta,
        "clt_zeta": limits.clt_cov_zeta,
        "clt_nu": limits.clt_cov_nu,
    }[mode]


def collect_estimates(cfg, threads=None):
    """Raw estimates (``R_ok x p``) for a CLT mode, the replicate index of
    each row and the failure count."""
    results = run_replicates(cfg, lambda t: _estimate_for_mode(estimate_all(t), cfg.mode), threads)
    ok, n_failed = _split_failures(results, cfg)
    ids = np.array([r for r, res in enumerate(results) if not isinstance(res, SingularDesign)])
    return np.array(ok), ids, n_failed


def standardize(estimates, truth, n_generations):
    """``sqrt(|T_{n-1}|) (estimate - truth)`` row by row."""
    return math.sqrt(subtree_counts(n_generations - 1)[1]) * (np.asarray(estimates) - truth)


@dataclass
class CltReport:
    mode: str
    n_generations: int
    replicates: int
    n_failed: int
    truth: np.ndarray
    replicate_ids: np.ndarray
    estimates_mean: np.ndarray
    standardized_samples: np.ndarray
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    frobenius_rel_err: float
    mahalanobis: np.ndarray
    ks_distance_chi2: float
    ks_critical: float
    tol_cov: float
    level: float
    passed: bool = field(default=False)

    def to_dict(self, include_samples=False):
        out = {
            "mode": self.mode,
            "n_generations": self.n_generations,
            "replicates": self.replicates,
            "n_failed": self.n_failed,
            "truth": self.truth.tolist(),
            "estimates_mean": self.estimates_mean.tolist(),
            "empirical_cov": self.empirical_cov.tolist(),
            "theoretical_cov": self.theoretical_cov.tolist(),
            "frobenius_rel_err": self.frobenius_rel_err,
            "ks_distance_chi2": self.ks_distance_chi2,
            "ks_critical": self.ks_critical,
            "tol_cov": self.tol_cov,
            "level": self.level,
            "pass": self.passed,
            "mahalanobis": self.mahalanobis.tolist(),
        }
        if include_samples:
            out["standardized_samples"] = self.standardized_samples.tolist()
        return out


def run_clt_experiment(cfg, tol_cov=None, level=DEFAULT_LEVEL, threads=None):
    """Compare the spread of standardized estimates with the CLT covariance.

    Passes when the relative Frobenius error of the empirical covariance is
    at most ``tol_cov`` and the KS distance between the squared Mahalanobis
    distances and the chi-square law is below the ``level`` critical value.
    """
    if cfg.mode not in CLT_MODES:
        raise ValueError(f"not a CLT mode: {cfg.mode!r}")
    m = derive_moment_set(cfg.spec)
    report = validate_hypotheses(m)
    if not report.theory_valid_for_clt:
        raise HypothesisGateError(report, "clt")
    limits = limit_matrices(m)
    theo = theoretical_covariance(limits, cfg.mode)
    tol_cov = DEFAULT_TOL_COV[cfg.mode] if tol_cov is None else tol_cov

    estimates, ids, n_failed = collect_estimates(cfg, threads)
    truth = truth_vector(m, cfg.mode)
    z = standardize(estimates, truth, cfg.n_generations)
    emp, rel = summarize_covariance(z, theo)
    d2 = mahalanobis_squared(z, theo)
    p = z.shape[1]
    ks = ks_distance(d2, lambda x: chi2_cdf(x, p))
    crit = ks_critical(z.shape[0], level)
    return CltReport(
        mode=cfg.mode,
        n_generations=cfg.n_generations,
        replicates=cfg.replicates,
        n_failed=n_failed,
        truth=truth,
        replicate_ids=ids,
        estimates_mean=estimates.mean(axis=0),
        standardized_samples=z,
        empirical_cov=emp,
        theoretical_cov=theo,
        frobenius_rel_err=rel,
        mahalanobis=d2,
        ks_distance_chi2=ks,
        ks_critical=crit,
        tol_cov=tol_cov,
        level=level,
        passed=bool(rel <= tol_cov and ks <= crit),
    )


# ------------------------------------------------------------ QSL

def _qsl_terms(tree, theta, lam):
    """Per-generation terms of the two quadratic statistics for one tree.

    Term ``k`` (``k = 1..n``) is ``|T_{k-1}| e^T Lambda e`` with
    ``e = theta_hat_k - theta``, and ``M_k^T P_{k-1}^{-1} M_k`` with
    ``M_k = (I (x) S_{k-1}) e`` and
    ``P_{k-1} = sum (1 + X^2) I (x) [[X^2, X], [X, 1]]``.
    Generation 1 has one parent and contributes nothing.
    """
    cum = cumulative_generation_sums(tree)
    n = cum.shape[0]
    lam_terms = np.zeros(n)
    proof_terms = np.zeros(n)
    for i in range(1, n):
        row = cum[i]
        cnt, x, x2, x3, x4 = row[:5]
        e = theta_from_sums(row) - theta
        lam_terms[i] = cnt * (e @ lam @ e)
        s_mat = np.array([[x2, x], [x, cnt]])
        p_mat = np.array([[x2 + x4, x + x3], [x + x3, cnt + x2]])
        total = 0.0
        for blk in (e[:2], e[2:]):
            mk = s_mat @ blk
            total += mk @ np.linalg.solve(p_mat, mk)
        proof_terms[i] = total
    return lam_terms, proof_terms


@dataclass
class QslReport:
    generations: np.ndarray
    q: np.ndarray
    q_proof: np.ndarray
    limit: float
    lambda_weighted_limit: float
    final_rel_err: float
    final_rel_err_proof: float
    replicates: int
    n_failed: int
    degenerate: bool

    def to_dict(self):
        return {
            "generations": self.generations.tolist(),
            "q": self.q.tolist(),
            "q_proof": self.q_proof.tolist(),
            "limit": self.limit,
            "lambda_weighted_limit": self.lambda_weighted_limit,
            "final_rel_err": self.final_rel_err,
            "final_rel_err_proof": self.final_rel_err_proof,
            "replicates": self.replicates,
            "n_failed": self.n_failed,
            "degenerate": self.degenerate,
        }


def running_mean_over_generations(terms):
    """``q_m = (1/m) sum_{k<=m} term_k`` for ``m = 1..n`` (columns)."""
    return np.cumsum(terms, axis=-1) / np.arange(1, terms.shape[-1] + 1)


def run_qsl_experiment(cfg, threads=None):
    """Replicate-averaged running quadratic statistics against their limit.

    ``q`` is the ``Lambda``-weighted statistic; ``q_proof`` uses the
    self-normalised form ``M_k^T P_{k-1}^{-1} M_k``. A model with ``L = 0``
    (no noise at all) is flagged ``degenerate`` and no relative error is
    formed.
    """
    m = derive_moment_set(cfg.spec)
    s = s_moments(m, 4)
    c = np.array([[s[2], s[1]], [s[1], 1.0]])
    d = np.array([[s[4], s[3]], [s[3], s[2]]])
    lam = np.kron(np.eye(2), c + d)
    degenerate = not np.any(l_matrix(m, s))
    if degenerate:
        limit = lam_limit = 0.0
    else:
        limits = limit_matrices(m)
        limit, lam_limit = limits.qsl_limit, limits.qsl_lambda_weighted_limit
    theta = cfg.spec.theta

    results = run_replicates(cfg, lambda t: _qsl_terms(t, theta, lam), threads)
    ok, n_failed = _split_failures(results, cfg)
    lam_terms = np.array([r[0] for r in ok])
    proof_terms = np.array([r[1] for r in ok])
    q = running_mean_over_generations(lam_terms).mean(axis=0)
    q_proof = running_mean_over_generations(proof_terms).mean(axis=0)

    def rel(v):
        return None if degenerate else float(abs(v - limit) / limit)

    return QslReport(
        generations=np.arange(1, cfg.n_generations + 1),
        q=q,
        q_proof=q_proof,
        limit=limit,
        lambda_weighted_limit=lam_limit,
        final_rel_err=rel(q[-1]),
        final_rel_err_proof=rel(q_proof[-1]),
        replicates=cfg.replicates,
        n_failed=n_failed,
        degenerate=degenerate,
    )


# ------------------------------------------------------------ rates

RATE_QUANTITIES = ("theta", "eta", "zeta", "nu")


@dataclass
class RateReport:
    generations: np.ndarray
    normalized_errors: dict   # quantity -> R_ok x G array
    medians: dict             # quantity -> length-G array
    replicates: int
    n_failed: int

    def to_dict(self):
        return {
            "generations": self.generations.tolist(),
            "median_normalized_sq_error": {k: v.tolist() for k, v in self.medians.items()},
            "normalized_sq_error": {k: v.tolist() for k, v in self.normalized_errors.items()},
            "replicates": self.replicates,
            "n_failed": self.n_failed,
        }


def _rate_errors(tree, truths):
    gens = range(RATE_FIRST_GENERATION, tree.n_generations + 1)
    out = np.empty((len(RATE_QUANTITIES), len(gens)))
    for j, g in enumerate(gens):
        b = estimate_all(tree.prefix(g))
        scale = subtree_counts(g - 1)[1] / g
        est = (b.theta.vec, b.second_order.eta_hat, b.second_order.zeta_hat, b.second_order.nu_hat)
        for i, (e, t) in enumerate(zip(est, truths)):
            out[i, j] = scale * float(np.sum((e - t) ** 2))
    return out


def run_rate_experiment(cfg, threads=None):
    """``||est_g - truth||^2 |T_{g-1}| / g`` for generations ``4..n``.

    Replicates with a singular design are dropped and counted; they never
    abort the run.
    """
    m = derive_moment_set(cfg.spec)
    truths = tuple(truth_vector(m, mode) for mode in CLT_MODES)
    results = run_replicates(cfg, lambda t: _rate_errors(t, truths), threads)
    ok, n_failed = _split_failures(results, cfg, fatal=False)
    gens = np.arange(RATE_FIRST_GENERATION, cfg.n_generations + 1)
    if ok:
        stacked = np.array(ok)
    else:
        stacked = np.empty((0, len(RATE_QUANTITIES), gens.size))
    errors = {q: stacked[:, i, :] for i, q in enumerate(RATE_QUANTITIES)}
    medians = {
        q: (np.median(v, axis=0) if v.shape[0] else np.full(gens.size, np.nan))
        for q, v in errors.items()
    }
    return RateReport(gens, errors, medians, cfg.replicates, n_failed)


def run_experiment(cfg, threads=None, **kwargs):
    """Dispatch on ``cfg.mode``."""
    if cfg.mode in CLT_MODES:
        return run_clt_experiment(cfg, threads=threads, **kwargs)
    if cfg.mode == "qsl":
        return run_qsl_experiment(cfg, threads)
    return run_rate_experiment(cfg, threads)
