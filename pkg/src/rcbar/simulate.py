"""Seeded simulation of random coefficient bifurcating AR trees.

Draw protocol, fixed so a seed pins down every node:

1. One uniform for the ancestor ``X_1`` (consumed even when it is constant).
2. For each parent ``k = 1, 2, ...`` in ascending order: two uniforms for the
   coefficient pair ``(a_k, b_k)``, then two for the noise pair
   ``(eps_2k, eps_2k+1)``.

Uniforms are ``(2j + 1) / 2**53`` where ``j`` is the top 52 bits of one raw
PCG64 output; they are exact doubles strictly inside ``(0, 1)``. Gaussian deviates are the
inverse normal CDF of those uniforms. Because the stream is consumed in node
order, extending a tree by one generation leaves every existing node intact.
"""
from __future__ import annotations

import numpy as np

from ._kernels import KERNELS
from .tree import Tree, subtree_counts

UNIFORMS_PER_PAIR = 2
UNIFORMS_PER_PARENT = 2 * UNIFORMS_PER_PAIR

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_M53 = 2.0**-53


def splitmix64(z):
    """SplitMix64 finaliser; a bijection on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed, replicate):
    """Seed of replicate ``r``: ``splitmix64(master + (r + 1) * golden)``.

    For a fixed master seed the map ``r -> seed`` is injective on
    ``0 <= r < 2**64``: the golden increment is odd and splitmix64 is a
    bijection.
    """
    return splitmix64((int(master_seed) + (int(replicate) + 1) * _GOLDEN) & _MASK64)


def mix_seeds(master_seed, replicates):
    """Vectorised :func:`mix_seed` over an array of replicate indices."""
    r = np.asarray(replicates, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(int(master_seed) & _MASK64) + (r + np.uint64(1)) * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class RngStream:
    """Deterministic uniform stream seeded by a 64-bit integer.

    Not thread-safe; give each thread its own stream.
    """

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniforms(self, size):
        """``size`` uniforms strictly inside (0, 1)."""
        j = self._gen.bit_generator.random_raw(size) >> np.uint64(12)
        return ((j << np.uint64(1)) | np.uint64(1)).astype(np.float64) * _TWO_M53


def sample_pair(law, rng):
    """One draw ``(x, y)`` from ``law``; always consumes two uniforms."""
    u = rng.uniforms(UNIFORMS_PER_PAIR)
    x, y = law.from_uniforms(u[0], u[1])
    return float(x), float(y)


def pairs_from_uniforms(law, u):
    """Vectorised pair draws from an ``(m, 2)`` array of uniforms."""
    x, y = law.from_uniforms(u[:, 0], u[:, 1])
    out = np.empty((u.shape[0], 2))
    out[:, 0] = x
    out[:, 1] = y
    return out


def _draw_innovations(spec, n, seed):
    n_parents = subtree_counts(n - 1)[1]
    u = RngStream(seed).uniforms(1 + UNIFORMS_PER_PARENT * n_parents)
    draws = u[1:].reshape(n_parents, UNIFORMS_PER_PARENT)
    coef = pairs_from_uniforms(spec.coeff_law, draws[:, 0:2])
    noise = pairs_from_uniforms(spec.noise_law, draws[:, 2:4])
    return spec.initial.from_uniform(u[0]), coef, noise


def simulate_tree(spec, n, seed, kernels=None):
    """Simulate generations ``0..n`` of the process described by ``spec``.

    Parameters
    ----------
    spec : ModelSpec
    n : int
        Last generation, ``n >= 1``.
    seed : int
        64-bit seed of the tree's uniform stream.
    kernels : namespace, optional
        Kernel backend; defaults to the one selected at import.

    Returns
    -------
    Tree
    """
    return simulate_tree_with_innovations(spec, n, seed, kernels)[0]


def simulate_tree_with_innovations(spec, n, seed, kernels=None):
    """Like :func:`simulate_tree` but also return the drawn coefficient and
    noise pairs, each of shape ``(|T_{n-1}|, 2)``."""
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one generation, got n={n}")
    kernels = kernels or KERNELS
    x1, coef, noise = _draw_innovations(spec, n, seed)
    values = np.empty(subtree_counts(n)[1])
    values[0] = x1
    kernels.grow_tree(values, coef, noise)
    return Tree(n, values), coef, noise
