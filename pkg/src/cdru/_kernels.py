"""Float hot loops with an optional numba backend.

Each kernel exists twice: a loop version written for ``numba.njit`` and a
numpy version. The loop versions are compiled when numba imports and the
environment variable ``CDRU_DISABLE_NUMBA`` is unset (or ``0``); otherwise
the numpy versions are used. Exact-rational code never goes through here.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("CDRU_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")

__all__ = [
    "USE_NUMBA",
    "maximizer_table",
    "simulate_emissions",
    "power_iteration",
    "superset_transform",
    "fill_extreme",
    "numpy_impl",
    "numba_impl",
]


# --- maximizer table ---------------------------------------------------------

def _maximizer_table_loops(ranks):
    m, n = ranks.shape
    out = np.full((m, 1 << n), -1, dtype=np.int64)
    for k in range(m):
        for mask in range(1, 1 << n):
            best = -1
            best_rank = n + 1
            for x in range(n):
                if (mask >> x) & 1 and ranks[k, x] < best_rank:
                    best_rank = ranks[k, x]
                    best = x
            out[k, mask] = best
    return out


def _maximizer_table_numpy(ranks):
    m, n = ranks.shape
    out = np.full((m, 1 << n), -1, dtype=np.int64)
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
    big = n + 1
    for mask in range(1, 1 << n):
        masked = np.where(bits[mask][None, :] == 1, ranks, big)
        out[:, mask] = masked.argmin(axis=1)
    return out


# --- Markov simulation -------------------------------------------------------

def _simulate_emissions_loops(cum, emit, start, uniforms, n_out):
    counts = np.zeros(n_out, dtype=np.int64)
    s = cum.shape[0]
    state = start
    for t in range(uniforms.shape[0]):
        counts[emit[state]] += 1
        nxt = np.searchsorted(cum[state], uniforms[t], side="right")
        if nxt >= s:
            nxt = s - 1
        state = nxt
    return counts


def _simulate_emissions_numpy(cum, emit, start, uniforms, n_out):
    s = cum.shape[0]
    states = np.empty(uniforms.shape[0], dtype=np.int64)
    state = int(start)
    rows = [np.ascontiguousarray(cum[i]) for i in range(s)]
    for t, u in enumerate(uniforms):
        states[t] = state
        state = min(int(np.searchsorted(rows[state], u, side="right")), s - 1)
    return np.bincount(emit[states], minlength=n_out).astype(np.int64)


# --- power iteration ---------------------------------------------------------

def _power_iteration_loops(P, x0, tol, maxiter):
    # lazy chain (P + I) / 2 shares the stationary vector and is aperiodic
    m = P.shape[0]
    x = x0.copy()
    for it in range(maxiter):
        y = np.zeros(m)
        for i in range(m):
            xi = x[i]
            if xi != 0.0:
                for j in range(m):
                    y[j] += xi * P[i, j]
        diff = 0.0
        total = 0.0
        for j in range(m):
            y[j] = 0.5 * (y[j] + x[j])
            total += y[j]
        for j in range(m):
            y[j] /= total
            diff += abs(y[j] - x[j])
        x = y
        if diff < tol:
            return x, it + 1
    return x, maxiter


def _power_iteration_numpy(P, x0, tol, maxiter):
    x = x0.copy()
    for it in range(maxiter):
        y = 0.5 * (x @ P + x)
        y /= y.sum()
        diff = np.abs(y - x).sum()
        x = y
        if diff < tol:
            return x, it + 1
    return x, maxiter


# --- superset Moebius / zeta transforms --------------------------------------

def _superset_transform_loops(arr, nbits, sign):
    out = arr.copy()
    size = 1 << nbits
    for b in range(nbits):
        bit = 1 << b
        for r in range(out.shape[0]):
            for mask in range(size):
                if not mask & bit:
                    out[r, mask] += sign * out[r, mask | bit]
    return out


def _superset_transform_numpy(arr, nbits, sign):
    rows = arr.shape[0]
    out = arr.reshape((rows,) + (2,) * nbits).copy()
    # C order puts the most significant bit first
    for axis in range(1, nbits + 1):
        lo = [slice(None)] * (nbits + 1)
        hi = [slice(None)] * (nbits + 1)
        lo[axis] = 0
        hi[axis] = 1
        out[tuple(lo)] += sign * out[tuple(hi)]
    return out.reshape(rows, 1 << nbits)


# --- extreme-point matrix ----------------------------------------------------

def _fill_extreme_loops(row_first, row_second, first_choice, second_choice,
                        pair_first, pair_second, col_of, n_cols):
    R = row_first.shape[0]
    out = np.zeros((R, n_cols), dtype=np.int8)
    for r in range(R):
        f = row_first[r]
        for k in range(pair_first.shape[0]):
            x = first_choice[f, pair_first[k]]
            y = second_choice[row_second[r, x], pair_second[k]]
            out[r, col_of[k, x, y]] = 1
    return out


def _fill_extreme_numpy(row_first, row_second, first_choice, second_choice,
                        pair_first, pair_second, col_of, n_cols):
    R = row_first.shape[0]
    out = np.zeros((R, n_cols), dtype=np.int8)
    rows = np.arange(R)
    for k in range(pair_first.shape[0]):
        x = first_choice[row_first, pair_first[k]]
        y = second_choice[row_second[rows, x], pair_second[k]]
        out[rows, col_of[k, x, y]] = 1
    return out


_LOOPS = {
    "maximizer_table": _maximizer_table_loops,
    "simulate_emissions": _simulate_emissions_loops,
    "power_iteration": _power_iteration_loops,
    "superset_transform": _superset_transform_loops,
    "fill_extreme": _fill_extreme_loops,
}

numpy_impl = {
    "maximizer_table": _maximizer_table_numpy,
    "simulate_emissions": _simulate_emissions_numpy,
    "power_iteration": _power_iteration_numpy,
    "superset_transform": _superset_transform_numpy,
    "fill_extreme": _fill_extreme_numpy,
}

if HAS_NUMBA:
    numba_impl = {name: numba.njit(cache=True)(fn) for name, fn in _LOOPS.items()}
else:  # pragma: no cover
    numba_impl = {}

_active = numba_impl if USE_NUMBA else numpy_impl


def maximizer_table(ranks):
    """``out[k, mask]`` is the best member of ``mask`` under order ``k`` (-1 for empty)."""
    return _active["maximizer_table"](np.ascontiguousarray(ranks, dtype=np.int64))


def simulate_emissions(cum, emit, start, uniforms, n_out):
    """Run a chain with cumulative rows ``cum`` and count emitted labels."""
    return _active["simulate_emissions"](
        np.ascontiguousarray(cum, dtype=np.float64),
        np.ascontiguousarray(emit, dtype=np.int64),
        int(start),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        int(n_out),
    )


def power_iteration(P, x0=None, tol=1e-14, maxiter=1_000_000):
    P = np.ascontiguousarray(P, dtype=np.float64)
    if x0 is None:
        x0 = np.full(P.shape[0], 1.0 / P.shape[0])
    return _active["power_iteration"](P, np.asarray(x0, dtype=np.float64), float(tol), int(maxiter))


def superset_transform(arr, nbits, sign):
    """Superset Moebius (``sign=-1``) or zeta (``sign=+1``) transform along the last axis."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    flat = arr.reshape(-1, 1 << nbits)
    return _active["superset_transform"](flat, int(nbits), float(sign)).reshape(arr.shape)


def fill_extreme(row_first, row_second, first_choice, second_choice,
                 pair_first, pair_second, col_of, n_cols):
    args = [np.ascontiguousarray(a, dtype=np.int64) for a in
            (row_first, row_second, first_choice, second_choice, pair_first, pair_second, col_of)]
    return _active["fill_extreme"](*args, int(n_cols))
