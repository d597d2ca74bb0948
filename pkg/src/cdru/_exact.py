"""Exact rational helpers.

Inner loops run on ``gmpy2.mpq`` when available and on ``Fraction``
otherwise. Everything handed back to callers is a ``Fraction``.
"""

from fractions import Fraction
from numbers import Rational

import numpy as np

try:
    from gmpy2 import mpq as Q

    HAS_GMPY = True
except ImportError:  # pragma: no cover
    Q = Fraction
    HAS_GMPY = False

__all__ = [
    "Q",
    "to_fraction",
    "fraction_array",
    "is_exact",
    "as_float",
    "rref",
    "nullspace",
    "solve",
    "snap_rational",
]


def to_fraction(value):
    """Convert ints, decimal or ``num/den`` strings, floats and mpq values to Fraction."""
    if isinstance(value, Fraction):
        if type(value.numerator) is int and type(value.denominator) is int:
            return value
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    if isinstance(value, Rational) or type(value).__name__ == "mpq":
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def fraction_array(values):
    """Object array of Fractions with the shape of ``values``."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(arr.reshape(-1)):
        flat[i] = to_fraction(v)
    return out


def is_exact(arr):
    return isinstance(arr, np.ndarray) and arr.dtype == object


def as_float(arr):
    return np.asarray(arr, dtype=float)


def _q(v):
    return v if type(v) is Q else Q(v)


def rref(rows, ncols):
    """Reduced row echelon form of a list of rows (copied to mpq).

    Returns ``(rows, pivots)`` where ``pivots[i]`` is the pivot column of row ``i``.
    """
    a = [[_q(v) for v in r] for r in rows]
    pivots = []
    r = 0
    m = len(a)
    for c in range(ncols):
        if r == m:
            break
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        row = a[r]
        inv = 1 / row[c]
        if inv != 1:
            for j in range(c, len(row)):
                if row[j] != 0:
                    row[j] *= inv
        nz = [j for j in range(c, len(row)) if row[j] != 0]
        for i in range(m):
            if i == r:
                continue
            f = a[i][c]
            if f != 0:
                other = a[i]
                for j in nz:
                    other[j] -= f * row[j]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def nullspace(rows, ncols):
    """Basis (list of mpq vectors) of ``{v : A v = 0}``."""
    red, pivots = rref(rows, ncols)
    pivset = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivset:
            continue
        v = [Q(0)] * ncols
        v[free] = Q(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[free]
        basis.append(v)
    return basis


def solve(rows, rhs):
    """One solution of ``A x = b`` (free variables at zero) or None when inconsistent."""
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red, pivots = rref(aug, ncols + 1)
    if pivots and pivots[-1] == ncols:
        return None
    x = [Q(0)] * ncols
    for row, pc in zip(red, pivots):
        x[pc] = row[ncols]
    return x


def snap_rational(x, max_denominator=10**6):
    """Closest rational with bounded denominator, as a Fraction."""
    return Fraction(float(x)).limit_denominator(max_denominator)
