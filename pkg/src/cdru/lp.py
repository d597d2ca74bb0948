"""Exact linear feasibility and optimisation over the rationals.

Problems have the form ``A_eq x = b_eq, A_ub x <= b_ub, x >= 0``. Every
answer leaving this module has been checked in exact arithmetic:

* a feasible point ``x`` satisfies all constraints exactly;
* an infeasibility certificate ``y = (y_eq, y_ub)`` satisfies
  ``y_ub >= 0``, ``y_eq A_eq + y_ub A_ub >= 0`` and ``y_eq b_eq + y_ub b_ub < 0``.

A floating-point HiGHS solve may propose a candidate (and is only ever a
hint). When the candidate does not survive exact checking, a dense rational
simplex with Bland's rule settles the question.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ._exact import Q, solve, to_fraction
from .errors import InternalBreach, ValidationError

__all__ = [
    "LPResult",
    "Feasibility",
    "simplex",
    "maximize",
    "feasible",
    "farkas_certificate",
    "verify_point",
    "verify_farkas",
    "strictly_positive_combination",
]


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: list = None
    value: Fraction = None
    farkas: list = None
    pivots: int = 0


@dataclass
class Feasibility:
    feasible: bool
    x: list = None
    farkas: list = None
    method: str = ""
    notes: list = field(default_factory=list)


class _Problem:
    """Constraint data held both as exact sparse rows and as float CSR."""

    def __init__(self, A_eq, b_eq, A_ub, b_ub, nvar):
        self.eq = _rows(A_eq, nvar)
        self.ub = _rows(A_ub, nvar)
        nvar = nvar if nvar is not None else _ncols(A_eq, A_ub)
        if nvar is None:
            raise ValidationError("cannot infer the number of variables")
        self.nvar = nvar
        self.b_eq = [Q(to_fraction(v)) for v in (b_eq if b_eq is not None else [])]
        self.b_ub = [Q(to_fraction(v)) for v in (b_ub if b_ub is not None else [])]
        if len(self.b_eq) != len(self.eq) or len(self.b_ub) != len(self.ub):
            raise ValidationError("right-hand side length does not match the constraint rows")

    @property
    def m(self):
        return len(self.eq) + len(self.ub)

    def std_rows(self):
        """Dense rows of ``[A_eq 0; A_ub I]`` and the stacked right-hand side."""
        width = self.nvar + len(self.ub)
        rows = []
        for r in self.eq:
            row = [Q(0)] * width
            for j, v in r.items():
                row[j] = v
            rows.append(row)
        for i, r in enumerate(self.ub):
            row = [Q(0)] * width
            for j, v in r.items():
                row[j] = v
            row[self.nvar + i] = Q(1)
            rows.append(row)
        return rows, self.b_eq + self.b_ub

    def float_parts(self):
        def dense(rows):
            if not rows:
                return None
            data, ri, ci = [], [], []
            for i, r in enumerate(rows):
                for j, v in r.items():
                    ri.append(i)
                    ci.append(j)
                    data.append(float(v))
            return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), self.nvar))

        beq = np.array([float(v) for v in self.b_eq]) if self.eq else None
        bub = np.array([float(v) for v in self.b_ub]) if self.ub else None
        return dense(self.eq), beq, dense(self.ub), bub


def _ncols(*mats):
    for a in mats:
        if a is None:
            continue
        if sp.issparse(a) or isinstance(a, np.ndarray):
            return a.shape[1]
        if len(a):
            return len(a[0])
    return None


def _rows(A, nvar):
    if A is None:
        return []
    out = []
    if sp.issparse(A):
        A = A.tocsr()
        for i in range(A.shape[0]):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            out.append({int(j): Q(to_fraction(v)) for j, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0})
        return out
    for row in A:
        out.append({j: Q(to_fraction(v)) for j, v in enumerate(row) if v != 0})
    return out


def _dot(row, x):
    return sum((v * x[j] for j, v in row.items()), Q(0))


def verify_point(A_eq=None, b_eq=None, A_ub=None, b_ub=None, x=None, nvar=None, _prob=None):
    """Exact check that ``x >= 0`` satisfies every constraint."""
    prob = _prob or _Problem(A_eq, b_eq, A_ub, b_ub, nvar if nvar is not None else len(x))
    xq = [Q(to_fraction(v)) for v in x]
    if len(xq) != prob.nvar or any(v < 0 for v in xq):
        return False
    if any(_dot(r, xq) != b for r, b in zip(prob.eq, prob.b_eq)):
        return False
    return all(_dot(r, xq) <= b for r, b in zip(prob.ub, prob.b_ub))


def verify_farkas(A_eq=None, b_eq=None, A_ub=None, b_ub=None, y=None, nvar=None, _prob=None):
    """Exact check of an infeasibility certificate ``y = (y_eq, y_ub)``."""
    prob = _prob or _Problem(A_eq, b_eq, A_ub, b_ub, nvar)
    yq = [Q(to_fraction(v)) for v in y]
    if len(yq) != prob.m:
        return False
    k = len(prob.eq)
    if any(v < 0 for v in yq[k:]):
        return False
    combo = [Q(0)] * prob.nvar
    for yi, r in zip(yq, prob.eq + prob.ub):
        if yi != 0:
            for j, v in r.items():
                combo[j] += yi * v
    if any(v < 0 for v in combo):
        return False
    return sum((a * b for a, b in zip(yq, prob.b_eq + prob.b_ub)), Q(0)) < 0


# --- dense rational simplex --------------------------------------------------

def _pivot(T, d, r, c):
    row = T[r]
    inv = 1 / row[c]
    nz = [j for j, v in enumerate(row) if v != 0]
    if inv != 1:
        for j in nz:
            row[j] *= inv
    for i, other in enumerate(T):
        if i != r:
            f = other[c]
            if f != 0:
                for j in nz:
                    other[j] -= f * row[j]
    f = d[c]
    if f != 0:
        for j in nz:
            d[j] -= f * row[j]


def _bland(T, d, basis, allowed):
    """Minimise with reduced-cost row ``d`` (last entry is minus the objective)."""
    pivots = 0
    rhs = len(T[0]) - 1 if T else 0
    while True:
        enter = next((j for j in allowed if d[j] < 0), None)
        if enter is None:
            return "optimal", pivots
        best = None
        for i, row in enumerate(T):
            a = row[enter]
            if a > 0:
                ratio = row[rhs] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", pivots
        _pivot(T, d, best[1], enter)
        basis[best[1]] = enter
        pivots += 1


def _simplex_std(A, b, c, maximize_):
    """Exact two-phase simplex on ``A z = b, z >= 0``. ``c`` may be None."""
    m = len(A)
    N = len(A[0]) if m else 0
    if m == 0:
        z = [Q(0)] * N
        if c is not None and any((ci > 0 if maximize_ else ci < 0) for ci in c):
            return LPResult("unbounded")
        return LPResult("optimal", z, Q(0))
    signs = [(-1 if bi < 0 else 1) for bi in b]
    T = []
    for i in range(m):
        s = signs[i]
        row = [s * v for v in A[i]] + [Q(0)] * m + [s * b[i]]
        row[N + i] = Q(1)
        T.append(row)
    basis = [N + i for i in range(m)]
    # phase one: minimise the sum of artificials
    d = [Q(0)] * (N + m + 1)
    for row in T:
        for j in range(N):
            d[j] -= row[j]
        d[-1] -= row[-1]
    status, p1 = _bland(T, d, basis, range(N + m))
    if status != "optimal":  # pragma: no cover
        raise InternalBreach("phase one cannot be unbounded")
    if -d[-1] > 0:
        # duals of the phase-one optimum: y_i = 1 - reduced cost of artificial i
        y = [-(1 - d[N + i]) * signs[i] for i in range(m)]
        return LPResult("infeasible", farkas=y, pivots=p1)
    # drive zero-level artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= N:
            j = next((j for j in range(N) if T[i][j] != 0), None)
            if j is None:
                continue
            _pivot(T, d, i, j)
            basis[i] = j
        keep.append(i)
    T = [T[i][:N] + [T[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    if c is None:
        z = [Q(0)] * N
        for i, j in enumerate(basis):
            z[j] = T[i][-1]
        return LPResult("optimal", z, Q(0), pivots=p1)
    cost = [(-ci if maximize_ else ci) for ci in c]
    d = cost + [Q(0)]
    for i, j in enumerate(basis):
        f = d[j]
        if f != 0:
            for k, v in enumerate(T[i]):
                if v != 0:
                    d[k] -= f * v
    status, p2 = _bland(T, d, basis, range(N))
    if status == "unbounded":
        return LPResult("unbounded", pivots=p1 + p2)
    z = [Q(0)] * N
    for i, j in enumerate(basis):
        z[j] = T[i][-1]
    value = sum((ci * zi for ci, zi in zip(c, z)), Q(0))
    return LPResult("optimal", z, value, pivots=p1 + p2)


def _fr(values):
    return [Fraction(int(v.numerator), int(v.denominator)) for v in values]


def simplex(c=None, A_eq=None, b_eq=None, A_ub=None, b_ub=None, maximize=True, nvar=None):
    """Exact LP over ``x >= 0``; with ``c=None`` only feasibility is decided.

    Returns
    -------
    LPResult
        ``x`` has length ``nvar`` (slacks dropped); ``farkas`` is given in the
        convention of :func:`verify_farkas`.
    """
    if nvar is None and c is not None:
        nvar = len(c)
    prob = _Problem(A_eq, b_eq, A_ub, b_ub, nvar)
    A, b = prob.std_rows()
    cq = None
    if c is not None:
        cq = [Q(to_fraction(v)) for v in c] + [Q(0)] * len(prob.ub)
    res = _simplex_std(A, b, cq, maximize)
    if res.status == "optimal":
        res.x = _fr(res.x[: prob.nvar])
        res.value = Fraction(int(res.value.numerator), int(res.value.denominator))
        if not verify_point(x=res.x, _prob=prob):  # pragma: no cover
            raise InternalBreach("simplex returned a point that fails exact verification")
    elif res.status == "infeasible":
        res.farkas = _fr(res.farkas)
        if not verify_farkas(y=res.farkas, _prob=prob):  # pragma: no cover
            raise InternalBreach("simplex returned a Farkas vector that fails exact verification")
    return res


def maximize(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None):
    """Exact maximum of ``c x``; raises on unbounded problems, returns None when infeasible."""
    res = simplex(c, A_eq, b_eq, A_ub, b_ub, maximize=True)
    if res.status == "unbounded":
        raise ValidationError("linear program is unbounded")
    if res.status == "infeasible":
        return None
    return res.value, res.x


# --- float-guided feasibility ------------------------------------------------

_DENOMS = (10**3, 10**6, 10**9, 10**12)


def _snap_candidates(values):
    for D in _DENOMS:
        yield [Fraction(float(v)).limit_denominator(D) for v in values]
    yield [Fraction(float(v)) for v in values]


def _support_solve(prob, z_float, tol=1e-9):
    """Exact solution of the standard-form system restricted to the float support."""
    A, b = prob.std_rows()
    N = len(A[0]) if A else prob.nvar
    support = [j for j in range(N) if z_float[j] > tol]
    sub = [[row[j] for j in support] for row in A]
    if not support:
        return None
    sol = solve(sub, b)
    if sol is None or any(v < 0 for v in sol):
        return None
    z = [Fraction(0)] * N
    for j, v in zip(support, sol):
        z[j] = Fraction(int(v.numerator), int(v.denominator))
    return z[: prob.nvar]


def _float_primal(prob):
    A_eq, b_eq, A_ub, b_ub = prob.float_parts()
    res = linprog(np.zeros(prob.nvar), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs-ds")
    return res


def _float_farkas(prob):
    """Float LP ``min y b  s.t.  y A >= 0, y_ub >= 0, -1 <= y <= 1``."""
    A_eq, b_eq, A_ub, b_ub = prob.float_parts()
    blocks = [m for m in (A_eq, A_ub) if m is not None]
    A = sp.vstack(blocks).tocsr()
    b = np.concatenate([v for v in (b_eq, b_ub) if v is not None])
    k = 0 if A_eq is None else A_eq.shape[0]
    bounds = [(-1, 1)] * k + [(0, 1)] * (A.shape[0] - k)
    res = linprog(b, A_ub=-A.T, b_ub=np.zeros(A.shape[1]), bounds=bounds, method="highs-ds")
    return res


def _tight_solve(prob, y_float, tol=1e-9):
    """Exact vertex through the constraints that are tight at ``y_float``."""
    rows_all = prob.eq + prob.ub
    m = len(rows_all)
    cols = [dict() for _ in range(prob.nvar)]
    for i, r in enumerate(rows_all):
        for j, v in r.items():
            cols[j][i] = v
    yA = np.zeros(prob.nvar)
    for j, col in enumerate(cols):
        yA[j] = sum(float(v) * y_float[i] for i, v in col.items())
    eqs, rhs = [], []
    for j, col in enumerate(cols):
        if abs(yA[j]) <= tol:
            row = [Q(0)] * m
            for i, v in col.items():
                row[i] = v
            eqs.append(row)
            rhs.append(Q(0))
    for i in range(m):
        for bound in (-1, 0, 1):
            if abs(y_float[i] - bound) <= tol:
                row = [Q(0)] * m
                row[i] = Q(1)
                eqs.append(row)
                rhs.append(Q(bound))
                break
    if not eqs:
        return None
    sol = solve(eqs, rhs)
    if sol is None:
        return None
    return [Fraction(int(v.numerator), int(v.denominator)) for v in sol]


def feasible(A_eq=None, b_eq=None, A_ub=None, b_ub=None, nvar=None, presolve=True):
    """Decide ``{A_eq x = b_eq, A_ub x <= b_ub, x >= 0}`` exactly.

    Returns
    -------
    Feasibility
        With an exactly verified point or Farkas certificate.
    """
    prob = _Problem(A_eq, b_eq, A_ub, b_ub, nvar)
    notes = []
    if presolve and prob.m:
        res = _float_primal(prob)
        if res.status == 0:
            for cand in _snap_candidates(res.x):
                cand = [v if v > 0 else Fraction(0) for v in cand]
                if verify_point(x=cand, _prob=prob):
                    return Feasibility(True, x=cand, method="presolve-snap")
            z_float = np.concatenate([res.x, res.slack if prob.ub else np.zeros(0)])
            cand = _support_solve(prob, z_float)
            if cand is not None and verify_point(x=cand, _prob=prob):
                return Feasibility(True, x=cand, method="presolve-support")
            notes.append("float point did not verify")
        elif res.status == 2:
            fres = _float_farkas(prob)
            if fres.status == 0 and fres.fun < 0:
                for cand in _snap_candidates(fres.x):
                    if verify_farkas(y=cand, _prob=prob):
                        return Feasibility(False, farkas=cand, method="presolve-snap")
                cand = _tight_solve(prob, fres.x)
                if cand is not None and verify_farkas(y=cand, _prob=prob):
                    return Feasibility(False, farkas=cand, method="presolve-tight")
            notes.append("float certificate did not verify")
        else:
            notes.append(f"float solver status {res.status}")
    A, b = prob.std_rows()
    res = _simplex_std(A, b, None, True)
    if res.status == "optimal":
        x = _fr(res.x[: prob.nvar])
        if not verify_point(x=x, _prob=prob):  # pragma: no cover
            raise InternalBreach("exact simplex point failed verification")
        return Feasibility(True, x=x, method="exact-simplex", notes=notes)
    y = _fr(res.farkas)
    if not verify_farkas(y=y, _prob=prob):  # pragma: no cover
        raise InternalBreach("exact simplex certificate failed verification")
    return Feasibility(False, farkas=y, method="exact-simplex", notes=notes)


def farkas_certificate(A_eq=None, b_eq=None, A_ub=None, b_ub=None, nvar=None):
    """Verified infeasibility certificate, or None when the system is feasible."""
    return feasible(A_eq, b_eq, A_ub, b_ub, nvar).farkas


def strictly_positive_combination(M, presolve=True):
    """Find ``i >= 0`` with every entry of ``M i`` strictly positive, or None.

    ``M`` is a dense (object or float) matrix. The answer is verified exactly.
    """
    Mq = [[Q(to_fraction(v)) for v in row] for row in np.asarray(M, dtype=object)]
    m = len(Mq)
    K = len(Mq[0]) if m else 0

    def ok(i):
        iq = [Q(v) for v in i]
        return all(v >= 0 for v in iq) and all(
            sum((a * b for a, b in zip(row, iq) if a != 0 and b != 0), Q(0)) > 0 for row in Mq)

    if presolve and K:
        Mf = np.array([[float(v) for v in row] for row in Mq])
        res = linprog(np.ones(K), A_ub=-Mf, b_ub=-np.ones(m), bounds=(0, None), method="highs-ds")
        if res.status == 0:
            for cand in _snap_candidates(res.x):
                cand = [v if v > 0 else Fraction(0) for v in cand]
                if ok(cand):
                    return cand
    # exact: M i - s = 1 with i, s >= 0
    res = simplex(None, A_eq=np.hstack([np.asarray(M, dtype=object),
                                        -np.eye(m, dtype=int).astype(object)]),
                  b_eq=[1] * m, nvar=K + m)
    if res.status != "optimal":
        return None
    cand = res.x[:K]
    if not ok(cand):  # pragma: no cover
        raise InternalBreach("exact plan failed verification")
    return cand
