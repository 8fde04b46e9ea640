"""Heap-ordered binary tree indexing and storage for one realization.

Node ``k`` has children ``2k`` and ``2k+1``; the root is node 1. Values are
stored in a flat array with ``values[k - 1] == X_k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def generation_of(k):
    """Generation index ``floor(log2 k)`` of node ``k``."""
    k = int(k)
    if k < 1:
        raise ValueError(f"node index must be >= 1, got {k}")
    return k.bit_length() - 1


def parent_of(k):
    k = int(k)
    if k <= 1:
        raise ValueError(f"node {k} has no parent")
    return k // 2


def subtree_counts(n):
    """Return ``(|G_n|, |T_n|) = (2**n, 2**(n+1) - 1)``."""
    n = int(n)
    if n < 0:
        raise ValueError(f"generation index must be >= 0, got {n}")
    return 2**n, 2 ** (n + 1) - 1


@dataclass(frozen=True, eq=False)
class Tree:
    """One realization ``X_1 .. X_{2^(n+1)-1}`` observed up to generation ``n``."""

    n_generations: int
    values: np.ndarray

    def __post_init__(self):
        n = int(self.n_generations)
        if n < 0:
            raise ValueError("n_generations must be >= 0")
        vals = np.array(self.values, dtype=np.float64, order="C")
        expected = subtree_counts(n)[1]
        if vals.ndim != 1 or vals.size != expected:
            raise ValueError(
                f"a tree with {n} generations needs {expected} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("tree values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "n_generations", n)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values):
        """Build a tree from a complete heap-ordered sequence, inferring ``n``."""
        size = len(values)
        n = (size + 1).bit_length() - 2
        if size < 1 or subtree_counts(n)[1] != size:
            raise ValueError(f"{size} values do not form a complete tree")
        return cls(n, np.asarray(values, dtype=np.float64))

    def __len__(self):
        return self.values.size

    def x(self, k):
        """Value of node ``k`` (1-based)."""
        if not 1 <= k <= self.values.size:
            raise IndexError(f"node {k} outside tree of size {self.values.size}")
        return float(self.values[k - 1])

    @property
    def n_parents(self):
        """``|T_{n-1}|``, the number of nodes with observed children."""
        return subtree_counts(self.n_generations - 1)[1] if self.n_generations >= 1 else 0

    def prefix(self, g):
        """The sub-tree ``T_g`` made of generations ``0..g``."""
        if not 0 <= g <= self.n_generations:
            raise ValueError(f"generation {g} outside 0..{self.n_generations}")
        return Tree(g, self.values[: subtree_counts(g)[1]])

    def generations(self):
        """Generation index of every stored node, in storage order."""
        return np.repeat(np.arange(self.n_generations + 1), 2 ** np.arange(self.n_generations + 1))

    def scaled(self, factor):
        return Tree(self.n_generations, self.values * factor)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.n_generations == other.n_generations and np.array_equal(self.values, other.values)
