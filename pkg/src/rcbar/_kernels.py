"""Hot loops over tree nodes.

Every kernel exists twice: a plain-loop version compiled with numba and a
vectorised numpy version. ``RCBAR_NUMBA=0`` in the environment (or numba
being unavailable) selects numpy. Both are importable directly as
``NUMBA_KERNELS`` / ``NUMPY_KERNELS`` so they can be compared.

Arrays are the zero-based storage of :class:`rcbar.tree.Tree`: node ``k``
lives at ``values[k - 1]``, its children at ``values[2k - 1]`` and
``values[2k]``.
"""
import os
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

# column layout of parent_sums / generation_sums
SUM_FIELDS = ("n", "x", "x2", "x3", "x4", "e", "o", "xe", "xo")
# column layout of second_order_sums
SECOND_ORDER_FIELDS = ("x2", "x4", "ve2_x2", "ve2", "vo2_x2", "vo2", "vevo_x2", "vevo")


# ---------------------------------------------------------------- numpy path

def _np_grow_tree(values, coef, noise):
    n_parents = coef.shape[0]
    lo = 0
    width = 1
    while lo < n_parents:
        hi = min(lo + width, n_parents)
        x = values[lo:hi]
        values[2 * lo + 1 : 2 * hi + 1 : 2] = coef[lo:hi, 0] * x + noise[lo:hi, 0]
        values[2 * lo + 2 : 2 * hi + 2 : 2] = coef[lo:hi, 1] * x + noise[lo:hi, 1]
        lo = hi
        width *= 2
    return values


def _np_block_sums(values, lo, hi):
    x = values[lo:hi]
    e = values[2 * lo + 1 : 2 * hi + 1 : 2]
    o = values[2 * lo + 2 : 2 * hi + 2 : 2]
    x2 = x * x
    return np.array(
        [hi - lo, x.sum(), x2.sum(), (x2 * x).sum(), (x2 * x2).sum(),
         e.sum(), o.sum(), (x * e).sum(), (x * o).sum()],
        dtype=np.float64,
    )


def _np_parent_sums(values, n_parents):
    return _np_block_sums(values, 0, n_parents)


def _np_generation_sums(values, n_parent_generations):
    out = np.empty((n_parent_generations, len(SUM_FIELDS)))
    for g in range(n_parent_generations):
        out[g] = _np_block_sums(values, 2**g - 1, 2 ** (g + 1) - 1)
    return out


def _np_second_order_sums(values, n_parents, a, c, b, d):
    x = values[:n_parents]
    ve = values[1 : 2 * n_parents + 1 : 2] - a * x - c
    vo = values[2 : 2 * n_parents + 2 : 2] - b * x - d
    x2 = x * x
    ve2 = ve * ve
    vo2 = vo * vo
    vevo = ve * vo
    return np.array(
        [x2.sum(), (x2 * x2).sum(), (ve2 * x2).sum(), ve2.sum(),
         (vo2 * x2).sum(), vo2.sum(), (vevo * x2).sum(), vevo.sum()],
        dtype=np.float64,
    )


def _np_power_sums(values, p_max):
    out = np.empty(p_max + 1)
    out[0] = values.size
    acc = np.ones_like(values)
    for p in range(1, p_max + 1):
        acc = acc * values
        out[p] = acc.sum()
    return out


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    grow_tree=_np_grow_tree,
    parent_sums=_np_parent_sums,
    generation_sums=_np_generation_sums,
    second_order_sums=_np_second_order_sums,
    power_sums=_np_power_sums,
)


# ---------------------------------------------------------------- loop path

def _loop_grow_tree(values, coef, noise):
    for k in range(coef.shape[0]):
        x = values[k]
        values[2 * k + 1] = coef[k, 0] * x + noise[k, 0]
        values[2 * k + 2] = coef[k, 1] * x + noise[k, 1]
    return values


def _loop_generation_sums(values, n_parent_generations):
    out = np.zeros((n_parent_generations, 9))
    for g in range(n_parent_generations):
        row = out[g]
        lo = 2**g - 1
        hi = 2 ** (g + 1) - 1
        for k in range(lo, hi):
            x = values[k]
            e = values[2 * k + 1]
            o = values[2 * k + 2]
            x2 = x * x
            row[1] += x
            row[2] += x2
            row[3] += x2 * x
            row[4] += x2 * x2
            row[5] += e
            row[6] += o
            row[7] += x * e
            row[8] += x * o
        row[0] = hi - lo
    return out


def _loop_parent_sums(values, n_parents):
    out = np.zeros(9)
    for k in range(n_parents):
        x = values[k]
        e = values[2 * k + 1]
        o = values[2 * k + 2]
        x2 = x * x
        out[1] += x
        out[2] += x2
        out[3] += x2 * x
        out[4] += x2 * x2
        out[5] += e
        out[6] += o
        out[7] += x * e
        out[8] += x * o
    out[0] = n_parents
    return out


def _loop_second_order_sums(values, n_parents, a, c, b, d):
    out = np.zeros(8)
    for k in range(n_parents):
        x = values[k]
        ve = values[2 * k + 1] - a * x - c
        vo = values[2 * k + 2] - b * x - d
        x2 = x * x
        ve2 = ve * ve
        vo2 = vo * vo
        vevo = ve * vo
        out[0] += x2
        out[1] += x2 * x2
        out[2] += ve2 * x2
        out[3] += ve2
        out[4] += vo2 * x2
        out[5] += vo2
        out[6] += vevo * x2
        out[7] += vevo
    return out


def _loop_power_sums(values, p_max):
    out = np.zeros(p_max + 1)
    out[0] = values.size
    for k in range(values.size):
        x = values[k]
        acc = 1.0
        for p in range(1, p_max + 1):
            acc *= x
            out[p] += acc
    return out


def _compile():
    jit = njit(cache=True, nogil=True)
    return SimpleNamespace(
        name="numba",
        grow_tree=jit(_loop_grow_tree),
        parent_sums=jit(_loop_parent_sums),
        generation_sums=jit(_loop_generation_sums),
        second_order_sums=jit(_loop_second_order_sums),
        power_sums=jit(_loop_power_sums),
    )


NUMBA_KERNELS = _compile() if njit is not None else None


def numba_requested():
    return os.environ.get("RCBAR_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def select(use_numba=None):
    """Return the kernel namespace for the requested backend."""
    if use_numba is None:
        use_numba = numba_requested()
    if use_numba and NUMBA_KERNELS is not None:
        return NUMBA_KERNELS
    return NUMPY_KERNELS


KERNELS = select()
BACKEND = KERNELS.name
