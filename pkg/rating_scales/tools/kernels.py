"""Hot loops over the CSR coupling matrix: Gray-code enumeration, annealing, and descent.

Every kernel works on local fields F_k = linear_k + sum_l J_kl x_l, so flipping bit k
changes the energy by (1 - 2 x_k) F_k and updates only the row of J for k.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

try:
    import numba

    jit = numba.jit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    logger.warning("numba not installed; solver kernels run as plain Python")

    def jit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


@jit(nopython=True, nogil=True, cache=True)
def local_fields(lin, indptr, indices, data, x):
    n = lin.shape[0]
    fields = lin.copy()
    for k in range(n):
        if x[k]:
            for p in range(indptr[k], indptr[k + 1]):
                fields[indices[p]] += data[p]
    return fields


@jit(nopython=True, nogil=True, cache=True)
def energy_of(lin, indptr, indices, data, x):
    """Energy without offset; J is symmetric so each pair is counted from one side."""
    e = 0.0
    n = lin.shape[0]
    for k in range(n):
        if x[k]:
            e += lin[k]
            for p in range(indptr[k], indptr[k + 1]):
                if indices[p] > k and x[indices[p]]:
                    e += data[p]
    return e


@jit(nopython=True, nogil=True, cache=True)
def _flip(k, x, fields, indptr, indices, data):
    step = 1.0 - 2.0 * x[k]
    x[k] = 1 - x[k]
    for p in range(indptr[k], indptr[k + 1]):
        fields[indices[p]] += step * data[p]


@jit(nopython=True, nogil=True, cache=True)
def gray_scan(lin, indptr, indices, data, n_free, prefix, tol, capacity):
    """Enumerate the 2^n_free low bits with the high bits fixed to ``prefix``.

    Returns (best energy, minimizer count, stored bitmasks, evaluations). Bit k of a mask is
    variable k. Energies within ``tol`` of the best count as ties.
    """
    n = lin.shape[0]
    x = np.zeros(n, dtype=np.int8)
    mask = np.int64(0)
    for k in range(n_free, n):
        if (prefix >> (k - n_free)) & 1:
            x[k] = 1
            mask |= np.int64(1) << np.int64(k)
    fields = local_fields(lin, indptr, indices, data, x)
    e = energy_of(lin, indptr, indices, data, x)

    best = e
    count = 1
    stored = np.zeros(capacity, dtype=np.int64)
    stored[0] = mask
    n_stored = 1
    total = np.int64(1) << np.int64(n_free)
    for s in range(1, total):
        # Gray code step s flips the lowest set bit of s
        k = 0
        while not (s >> k) & 1:
            k += 1
        e += (1.0 - 2.0 * x[k]) * fields[k]
        _flip(k, x, fields, indptr, indices, data)
        mask ^= np.int64(1) << np.int64(k)
        if e < best - tol:
            best = e
            count = 1
            stored[0] = mask
            n_stored = 1
        elif e <= best + tol:
            count += 1
            if n_stored < capacity:
                stored[n_stored] = mask
                n_stored += 1
            if e < best:
                best = e
    return best, count, stored[:n_stored], total


@jit(nopython=True, nogil=True)
def anneal_run(lin, indptr, indices, data, temps, rng, groups, group_coupling):
    """One Metropolis run: a sequential single-flip sweep per temperature, then swap moves.

    ``rng`` is a per-run ``np.random.Generator``; nothing touches the global numpy state.

    ``groups`` is a (g, w) array of one-hot variable groups (g may be 0); a swap moves the single
    set bit of a group to another member at energy change F_b - F_a - J_ab.
    Returns (best state, best energy without offset, proposals).
    """
    n = lin.shape[0]
    x = np.zeros(n, dtype=np.int8)
    for k in range(n):
        x[k] = 1 if rng.random() < 0.5 else 0
    fields = local_fields(lin, indptr, indices, data, x)
    e = energy_of(lin, indptr, indices, data, x)
    best_x = x.copy()
    best = e
    proposals = 0
    n_groups, width = groups.shape[0], groups.shape[1]

    for t in range(temps.shape[0]):
        temp = temps[t]
        for k in range(n):
            delta = (1.0 - 2.0 * x[k]) * fields[k]
            proposals += 1
            if delta <= 0.0 or np.exp(-delta / temp) > rng.random():
                _flip(k, x, fields, indptr, indices, data)
                e += delta
        for g in range(n_groups):
            set_pos = -1
            ones = 0
            for a in range(width):
                if x[groups[g, a]]:
                    ones += 1
                    set_pos = a
            if ones != 1:
                continue
            other = rng.integers(0, width - 1)
            if other >= set_pos:
                other += 1
            ia, ib = groups[g, set_pos], groups[g, other]
            delta = fields[ib] - fields[ia] - group_coupling[g, set_pos, other]
            proposals += 1
            if delta <= 0.0 or np.exp(-delta / temp) > rng.random():
                _flip(ia, x, fields, indptr, indices, data)
                _flip(ib, x, fields, indptr, indices, data)
                e += delta
        if e < best:
            best = e
            best_x[:] = x
    return best_x, best, proposals


@jit(nopython=True, nogil=True, cache=True)
def descend(lin, indptr, indices, data, x, groups, group_coupling, tol):
    """Steepest descent over single flips and group swaps until no move improves by more than tol."""
    x = x.copy()
    fields = local_fields(lin, indptr, indices, data, x)
    n = lin.shape[0]
    n_groups, width = groups.shape[0], groups.shape[1]
    steps = 0
    while True:
        best_delta = -tol
        best_k = -1
        best_a = -1
        best_b = -1
        for k in range(n):
            delta = (1.0 - 2.0 * x[k]) * fields[k]
            if delta < best_delta:
                best_delta = delta
                best_k = k
                best_a = -1
        for g in range(n_groups):
            for a in range(width):
                ia = groups[g, a]
                if not x[ia]:
                    continue
                for b in range(width):
                    ib = groups[g, b]
                    if b == a or x[ib]:
                        continue
                    delta = fields[ib] - fields[ia] - group_coupling[g, a, b]
                    if delta < best_delta:
                        best_delta = delta
                        best_k = -1
                        best_a = ia
                        best_b = ib
        if best_k >= 0:
            _flip(best_k, x, fields, indptr, indices, data)
        elif best_a >= 0:
            _flip(best_a, x, fields, indptr, indices, data)
            _flip(best_b, x, fields, indptr, indices, data)
        else:
            break
        steps += 1
    return x, steps
