"""Two-period consistency tests on possibly limited data.

Two linear systems decide whether a two-period joint choice rule has a
consumption-dependent random utility representation:

* the extreme-point cone ``r E = p, r >= 0`` over deterministic types
  (one first-period order plus one second-period order per consumed item);
* the Moebius system ``F q = l, q >= 0`` whose unknowns are the Moebius
  inverse on the full domain, with consistency rows for observed cells,
  marginality rows and flow-conservation rows.

Both are decided exactly and also scored by a weighted nonnegative
least-squares objective, which is zero exactly when the system is solvable.
"""

import itertools
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import nnls

from . import _kernels, lp
from ._exact import to_fraction
from .errors import InternalBreach, ValidationError
from .lattice import members, order_space

__all__ = [
    "ZERO_OBJECTIVE",
    "count_E_rows",
    "count_F_rows",
    "observed_cells",
    "ExtremePointMatrix",
    "build_E",
    "MobiusSystem",
    "build_F",
    "NNLSResult",
    "nnls_minimize",
    "TestVerdict",
    "test_extreme",
    "test_mobius",
]

ZERO_OBJECTIVE = 1e-12


def max_e_rows():
    return int(os.environ.get("CDRU_MAX_E_ROWS", 500_000))


def count_E_rows(n):
    """Extreme points of the two-period model: ``n (n!)^2``."""
    if n < 2:
        raise ValidationError("need at least two alternatives")
    return n * math.factorial(n) ** 2


def count_F_rows(n):
    """Rows of the limited Moebius system under full observation."""
    if n < 2:
        raise ValidationError("need at least two alternatives")
    half = n * 2 ** (n - 1)
    return half * half + n * 2 ** (2 * n - 1) - n * 2 ** n


def _observed_pairs(p, observed):
    if p.T != 2:
        raise ValidationError("the consistency tests are two-period")
    obs = p.observed if observed is None else observed
    obs = sorted({(int(A), int(B)) for A, B in obs})
    if not obs:
        raise ValidationError("no observed menu pairs")
    if not set(obs) <= set(p.observed):
        raise ValidationError("requested menu pairs are not observed in the data")
    return obs


def observed_cells(n, observed):
    """Cells ``(x, y, A, B)`` for each observed pair, in a fixed order."""
    return [(x, y, A, B) for A, B in observed for x in members(A) for y in members(B)]


def _p_vector(p, cells):
    return [p.table[x, A, y, B] for x, y, A, B in cells]


# --- extreme points ----------------------------------------------------------

@dataclass(frozen=True)
class ExtremePointMatrix:
    """Distinct deterministic choice patterns restricted to the observed cells.

    ``index_rows`` is the size of the index set the rows come from (one first
    order plus one order per alternative); ``formula_rows`` is
    :func:`count_E_rows`; ``matrix`` keeps one row per distinct pattern.
    """

    matrix: np.ndarray
    cells: list
    index_rows: int
    formula_rows: int

    @property
    def shape(self):
        return self.matrix.shape


def _distinct(patterns):
    """Indices of the first occurrence of each distinct row."""
    _, first = np.unique(patterns, axis=0, return_index=True)
    return np.sort(first)


def build_E(n, observed, max_rows=None):
    """Extreme-point matrix for ``n`` alternatives and observed menu pairs.

    Rows are deduplicated without enumerating the whole index set: first the
    distinct first-period patterns, then, per consumed alternative, the
    distinct second-period patterns on the menus that follow it.
    """
    observed = sorted({(int(A), int(B)) for A, B in observed})
    space = order_space(n)
    m = space.m
    cells = observed_cells(n, observed)
    col = {c: j for j, c in enumerate(cells)}
    firsts = sorted({A for A, _ in observed})
    seconds = sorted({B for _, B in observed})
    fpos = {A: i for i, A in enumerate(firsts)}
    spos = {B: i for i, B in enumerate(seconds)}
    first_choice = space.best[:, firsts]
    second_choice = space.best[:, seconds]
    reps = _distinct(first_choice)
    limit = max_e_rows() if max_rows is None else max_rows

    blocks = []
    total = 0
    for f in reps:
        per_x = []
        for x in range(n):
            follow = sorted({spos[B] for A, B in observed if first_choice[f, fpos[A]] == x})
            if follow:
                per_x.append(_distinct(second_choice[:, follow]))
            else:
                per_x.append(np.array([0]))
        count = math.prod(len(v) for v in per_x)
        total += count
        if total > limit:
            raise ValidationError(
                f"extreme-point matrix exceeds {limit} rows; raise CDRU_MAX_E_ROWS or use the Moebius test")
        grid = np.array(list(itertools.product(*per_x)), dtype=np.int64).reshape(count, n)
        blocks.append((np.full(count, f, dtype=np.int64), grid))
    row_first = np.concatenate([b[0] for b in blocks])
    row_second = np.concatenate([b[1] for b in blocks])
    pair_first = np.array([fpos[A] for A, _ in observed], dtype=np.int64)
    pair_second = np.array([spos[B] for _, B in observed], dtype=np.int64)
    col_of = np.full((len(observed), n, n), -1, dtype=np.int64)
    for k, (A, B) in enumerate(observed):
        for x in members(A):
            for y in members(B):
                col_of[k, x, y] = col[(x, y, A, B)]
    E = _kernels.fill_extreme(row_first, row_second, first_choice, second_choice,
                              pair_first, pair_second, col_of, len(cells))
    return ExtremePointMatrix(E, cells, m ** (n + 1), count_E_rows(n))


# --- Moebius system ----------------------------------------------------------

@dataclass(frozen=True)
class MobiusSystem:
    """``F q = l`` over full-domain Moebius cells; ``kinds`` labels each row."""

    F: sp.csr_matrix
    l: list
    variables: list
    kinds: list
    limited: bool

    @property
    def shape(self):
        return self.F.shape

    def count(self, kind):
        return sum(1 for k in self.kinds if k == kind)


def build_F(n, observed, p_values=None, limited=True):
    """Moebius constraint system.

    Parameters
    ----------
    observed : iterable of (A, B)
    p_values : dict, optional
        ``{(x, y, A, B): probability}`` for observed cells; zeros when omitted
        (useful for size accounting).
    limited : bool
        Flow rows only for first-period menus never observed; otherwise for
        every nonempty proper menu plus the normalisation row.
    """
    observed = sorted({(int(A), int(B)) for A, B in observed})
    full = (1 << n) - 1
    all_menus = range(1, full + 1)
    variables = [(x, y, A, B) for A in all_menus for B in all_menus for x in members(A) for y in members(B)]
    vid = {v: j for j, v in enumerate(variables)}
    rows, cols, vals, rhs, kinds = [], [], [], [], []

    def add(entries, b, kind):
        r = len(rhs)
        for j, v in entries.items():
            if v:
                rows.append(r)
                cols.append(j)
                vals.append(v)
        rhs.append(b)
        kinds.append(kind)

    for A, B in observed:
        supA = [S for S in all_menus if S & A == A]
        supB = [S for S in all_menus if S & B == B]
        for x in members(A):
            for y in members(B):
                entries = {vid[(x, y, S, U)]: 1 for S in supA for U in supB}
                b = 0 if p_values is None else p_values[(x, y, A, B)]
                add(entries, b, "consistency")
    for A in all_menus:
        for B in range(1, full):
            for x in members(A):
                entries = {}
                for y in members(B):
                    entries[vid[(x, y, A, B)]] = 1
                for z in range(n):
                    if not (B >> z) & 1:
                        key = vid[(x, z, A, B | (1 << z))]
                        entries[key] = entries.get(key, 0) - 1
                add(entries, 0, "recursivity")
    seen_first = {A for A, _ in observed}
    for A in range(1, full):
        if limited and A in seen_first:
            continue
        entries = {}
        for x in members(A):
            for y in range(n):
                entries[vid[(x, y, A, full)]] = 1
        for z in range(n):
            if not (A >> z) & 1:
                for y in range(n):
                    key = vid[(z, y, A | (1 << z), full)]
                    entries[key] = entries.get(key, 0) - 1
        add(entries, 0, "flow")
    if not limited or full not in seen_first:
        add({vid[(x, y, full, full)]: 1 for x in range(n) for y in range(n)}, 1, "initial")
    F = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), len(variables)), dtype=np.int64)
    return MobiusSystem(F, rhs, variables, kinds, limited)


# --- quadratic objective -----------------------------------------------------

@dataclass(frozen=True)
class NNLSResult:
    objective: float
    x: np.ndarray
    kkt: float

    @property
    def zero(self):
        return self.objective < ZERO_OBJECTIVE


def _weight_factor(omega, size):
    if omega is None:
        return None
    W = np.asarray(omega, dtype=float)
    if W.ndim == 1:
        W = np.diag(W)
    if W.shape != (size, size) or not np.allclose(W, W.T):
        raise ValidationError("weighting matrix must be symmetric with one row per target entry")
    try:
        return np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("weighting matrix is not positive definite") from exc


def nnls_minimize(A, b, omega=None):
    """``min over x >= 0`` of ``(A x - b)' Omega (A x - b)``.

    ``Omega`` may be a full positive definite matrix or its diagonal; the
    identity by default. Objectives below ``1e-12`` count as zero. ``kkt``
    is the largest violation of the optimality conditions.
    """
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float)
    b = np.asarray(b, dtype=float)
    L = _weight_factor(omega, len(b))
    As, bs = (A, b) if L is None else (L.T @ A, L.T @ b)
    x, _ = nnls(As, bs, maxiter=50 * max(A.shape))
    r = As @ x - bs
    obj = float(r @ r)
    g = 2 * As.T @ r
    kkt = max(float(np.max(-g, initial=0.0)), float(np.max(np.abs(g * x), initial=0.0)))
    return NNLSResult(obj, x, kkt)


# --- verdicts ----------------------------------------------------------------

@dataclass
class TestVerdict:
    """Outcome of one consistency test.

    ``objective`` is exactly zero when the exact solve succeeded (the
    verified certificate attains it) and the least-squares value otherwise;
    ``nnls_objective`` is always the float value.
    """

    __test__ = False

    method: str
    consistent: bool
    objective: object
    nnls_objective: float
    kkt: float
    certificate: list = field(repr=False, default=None)
    farkas: list = field(repr=False, default=None)
    shape: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def agree(self):
        """Exact verdict and quadratic verdict coincide."""
        return self.consistent == (self.nnls_objective < ZERO_OBJECTIVE)

    def to_dict(self):
        return {
            "method": self.method,
            "consistent": self.consistent,
            "objective": float(self.objective),
            "nnls_objective": self.nnls_objective,
            "kkt": self.kkt,
            "rows": self.shape[0] if self.shape else None,
            "columns": self.shape[1] if self.shape else None,
            "certificate": None if self.certificate is None else [str(v) for v in self.certificate],
            **self.details,
        }


def _finish(method, feas, A_rows, b, omega, shape, details, t0):
    fit = nnls_minimize(A_rows, [float(v) for v in b], omega)
    objective = Fraction(0) if feas.feasible else fit.objective
    details = dict(details, solve_method=feas.method, seconds=time.perf_counter() - t0)
    return TestVerdict(method, feas.feasible, objective, fit.objective, fit.kkt,
                       feas.x if feas.feasible else None, None if feas.feasible else feas.farkas,
                       shape, details)


def test_extreme(p, observed=None, omega=None, max_rows=None):
    """Is ``p`` on its observed pairs a nonnegative combination of extreme patterns?"""
    t0 = time.perf_counter()
    pairs = _observed_pairs(p, observed)
    E = build_E(p.n, pairs, max_rows)
    b = [to_fraction(v) for v in _p_vector(p, E.cells)]
    AT = sp.csr_matrix(E.matrix.T.astype(np.int64))
    feas = lp.feasible(A_eq=AT, b_eq=b, nvar=E.shape[0])
    if feas.feasible:
        r = np.array([float(v) for v in feas.x])
        if not np.allclose(r @ E.matrix, [float(v) for v in b], atol=1e-12):
            raise InternalBreach("extreme-point certificate does not reproduce the data")
    details = {"distinct_rows": E.shape[0], "index_rows": E.index_rows, "formula_rows": E.formula_rows}
    return _finish("extreme", feas, AT, b, omega, E.shape, details, t0)


def test_mobius(p, observed=None, limited=True, omega=None):
    """Is there a nonnegative full-domain Moebius inverse satisfying marginality and matching ``p``?"""
    t0 = time.perf_counter()
    pairs = _observed_pairs(p, observed)
    cells = observed_cells(p.n, pairs)
    values = {c: to_fraction(v) for c, v in zip(cells, _p_vector(p, cells))}
    system = build_F(p.n, pairs, values, limited)
    feas = lp.feasible(A_eq=system.F, b_eq=system.l, nvar=system.F.shape[1])
    details = {k: system.count(k) for k in ("consistency", "recursivity", "flow", "initial")}
    return _finish("mobius-limited" if limited else "mobius-full", feas, system.F, system.l, omega,
                   system.shape, details, t0)


# keep pytest from collecting the public test functions when imported by name
test_extreme.__test__ = False
test_mobius.__test__ = False
