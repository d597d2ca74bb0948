"""Transition functions, per-menu preference chains and their long-run behaviour.

A transition function is stored densely: ``kernel[x, k, l]`` is the
probability of moving to order ``l`` after an agent with order ``k`` consumed
``x``. The chain at menu ``A`` therefore has rows
``M_A[k] = kernel[best(k, A), k]``.

Object-dtype arrays of Fractions are handled exactly; float arrays with the
usual tolerances.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _kernels
from ._exact import Q, fraction_array, is_exact, nullspace, solve, to_fraction
from .errors import DegenerateDenominator, NotErgodic, ValidationError
from .lattice import AlternativeSet, members, order_space

__all__ = [
    "TransitionFunction",
    "ArrivalFunction",
    "ChainStructure",
    "menu_chain",
    "menu_chains",
    "chain_structure",
    "stationary",
    "stationary_power",
    "limit_distribution",
    "mean_passage",
    "mean_passage_first_step",
    "time_average_rcr",
    "invariant_distribution_common",
    "common_invariant",
    "joint_chain",
    "joint_stationary",
    "rho",
]

ROW_TOL = 1e-12


def _check_stochastic(rows, what, tol=ROW_TOL):
    rows = np.asarray(rows)
    if is_exact(rows):
        for idx in np.ndindex(rows.shape[:-1]):
            r = rows[idx]
            if any(v < 0 for v in r):
                raise ValidationError(f"{what}: negative probability at {idx}")
            if sum(r) != 1:
                raise ValidationError(f"{what}: row {idx} sums to {sum(r)}, not 1")
        return
    if not np.all(np.isfinite(rows)):
        raise ValidationError(f"{what}: non-finite entries")
    if (rows < -tol).any():
        raise ValidationError(f"{what}: negative probabilities")
    bad = np.abs(rows.sum(axis=-1) - 1.0) > tol
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(f"{what}: row {idx} sums to {rows.sum(axis=-1)[idx]!r}, not 1")


class TransitionFunction:
    """Dense kernel ``t_{l}(x, k)`` over alternatives ``x`` and orders ``k, l``.

    Parameters
    ----------
    alts : AlternativeSet
    kernel : array_like, shape (n, n!, n!)
        ``kernel[x, k, l]``. Object arrays are kept exact; anything else is
        cast to float64.
    """

    def __init__(self, alts, kernel, validate=True):
        self.alts = alts
        kernel = np.asarray(kernel)
        if kernel.dtype != object:
            kernel = kernel.astype(np.float64)
        m = alts.space.m
        if kernel.shape != (alts.n, m, m):
            raise ValidationError(f"kernel must have shape {(alts.n, m, m)}, got {kernel.shape}")
        self.kernel = kernel
        if validate:
            _check_stochastic(kernel, "transition kernel")

    @property
    def n(self):
        return self.alts.n

    @property
    def m(self):
        return self.kernel.shape[1]

    @property
    def exact(self):
        return is_exact(self.kernel)

    @property
    def full_support(self):
        return bool(np.all(self.kernel > 0))

    def __call__(self, x, k):
        """Distribution over next orders after order ``k`` consumed ``x``."""
        return self.kernel[x, k]

    def to_float(self):
        return TransitionFunction(self.alts, self.kernel.astype(np.float64), validate=False)

    def to_exact(self, max_denominator=None):
        """Exact copy; floats are snapped (optionally) and each row is renormalised exactly."""
        if self.exact:
            return self
        out = np.empty(self.kernel.shape, dtype=object)
        for idx in np.ndindex(self.kernel.shape[:-1]):
            row = [Fraction(float(v)) for v in self.kernel[idx]]
            if max_denominator:
                row = [v.limit_denominator(max_denominator) for v in row]
            total = sum(row)
            out[idx] = [v / total for v in row] if total else row
        return TransitionFunction(self.alts, out)

    @classmethod
    def from_callable(cls, alts, fn, exact=None):
        """Build from ``fn(x, order_index) -> distribution over order indices``."""
        m = alts.space.m
        rows = [[np.asarray(fn(x, k)) for k in range(m)] for x in range(alts.n)]
        kernel = np.array(rows)
        if exact or (exact is None and kernel.dtype == object):
            kernel = fraction_array(kernel)
        return cls(alts, kernel)

    @classmethod
    def consumption_independent(cls, alts, K):
        """``t(x, k) = K[k]`` for every ``x``."""
        K = np.asarray(K)
        return cls(alts, np.stack([K] * alts.n))

    @classmethod
    def state_independent(cls, alts, rows):
        """``t(x, k) = rows[x]`` for every order ``k``."""
        rows = np.asarray(rows)
        m = alts.space.m
        return cls(alts, np.stack([np.stack([rows[x]] * m) for x in range(alts.n)]))


class ArrivalFunction:
    """Markov chain over menus with at least two alternatives.

    ``matrix[i, j]`` is the probability that tomorrow's menu is ``menus[j]``
    given today's menu ``menus[i]``; menus default to all of ``X_2`` in
    ascending mask order.
    """

    def __init__(self, alts, matrix, menus=None, validate=True):
        self.alts = alts
        self.menus = list(menus) if menus is not None else alts.menus(2)
        if any(len(members(A)) < 2 for A in self.menus):
            raise ValidationError("arrival menus must have at least two alternatives")
        matrix = np.asarray(matrix)
        if matrix.dtype != object:
            matrix = matrix.astype(np.float64)
        k = len(self.menus)
        if matrix.shape != (k, k):
            raise ValidationError(f"arrival matrix must be {k}x{k}")
        self.matrix = matrix
        if validate:
            _check_stochastic(matrix, "arrival function")

    @property
    def full_support(self):
        return bool(np.all(self.matrix > 0))


def menu_chain(t, menu):
    """Rows ``t(M(k, menu), k)`` for every order ``k``."""
    if menu <= 0 or menu > t.alts.full:
        raise ValidationError(f"invalid menu mask {menu}")
    best = order_space(t.n).best[:, menu]
    return t.kernel[best, np.arange(t.m)]


def menu_chains(t, min_size=2):
    return {A: menu_chain(t, A) for A in t.alts.menus(min_size)}


@dataclass(frozen=True)
class ChainStructure:
    classes: list
    recurrent: list
    transient: np.ndarray
    periods: list

    @property
    def unichain(self):
        return len(self.recurrent) == 1

    @property
    def irreducible(self):
        return len(self.classes) == 1

    @property
    def aperiodic(self):
        return all(p == 1 for p in self.periods)

    @property
    def ergodic(self):
        return self.irreducible and self.aperiodic


def _period(adj, nodes):
    nodes = list(nodes)
    inside = set(nodes)
    level = {nodes[0]: 0}
    frontier = [nodes[0]]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v not in inside:
                    continue
                if v in level:
                    g = gcd(g, level[u] + 1 - level[v])
                else:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    return abs(g) if g else 0


def chain_structure(M):
    """Communicating classes of the positive-entry digraph, closed classes and their periods."""
    adj = np.asarray(M != 0, dtype=bool)
    ncomp, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")
    classes = [np.flatnonzero(labels == c) for c in range(ncomp)]
    recurrent, periods = [], []
    for cls in classes:
        out = adj[np.ix_(cls, np.arange(adj.shape[0]))].any(axis=0)
        out[cls] = False
        if not out.any():
            recurrent.append(cls)
            periods.append(_period(adj, cls))
    rec = np.concatenate(recurrent) if recurrent else np.array([], dtype=int)
    transient = np.setdiff1d(np.arange(adj.shape[0]), rec)
    return ChainStructure(classes, recurrent, transient, periods)


def _require_unichain(M, strict=False):
    st = chain_structure(M)
    if not st.unichain:
        raise NotErgodic(f"chain has {len(st.recurrent)} recurrent classes; the stationary distribution is not unique")
    if strict and not st.aperiodic:
        raise NotErgodic(f"recurrent class is periodic with period {st.periods[0]}")
    return st


def stationary(M, strict=False):
    """Unique stationary distribution of a chain with one recurrent class.

    Solves ``nu (M - I) = 0, sum(nu) = 1`` directly (exactly for object
    arrays), so periodic recurrent classes are handled. With ``strict=True``
    periodic chains raise :class:`NotErgodic` as well.
    """
    _require_unichain(M, strict)
    m = M.shape[0]
    if is_exact(M):
        rows = [[M[i, j] - (1 if i == j else 0) for i in range(m)] for j in range(m)]
        rows.append([1] * m)
        sol = solve(rows, [0] * m + [1])
        if sol is None:  # pragma: no cover
            raise NotErgodic("stationary system is inconsistent")
        return np.array([Fraction(int(v.numerator), int(v.denominator)) for v in sol], dtype=object)
    A = (np.asarray(M, dtype=float) - np.eye(m)).T
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    nu = np.linalg.solve(A, b)
    nu[np.abs(nu) < 1e-15] = 0.0
    return nu


def stationary_power(M, tol=1e-14, maxiter=1_000_000):
    """Power-iteration oracle for :func:`stationary` (float only)."""
    nu, _ = _kernels.power_iteration(np.asarray(M, dtype=float), tol=tol, maxiter=maxiter)
    return nu


def limit_distribution(M, initial):
    """Cesaro limit of ``initial M^k``; defined for every finite chain."""
    st = chain_structure(M)
    exact = is_exact(M)
    m = M.shape[0]
    initial = np.asarray(initial, dtype=object if exact else float)
    out = np.zeros(m, dtype=object if exact else float)
    if exact:
        out[:] = Fraction(0)
    trans = st.transient
    for cls in st.recurrent:
        sub = M[np.ix_(cls, cls)]
        pi = stationary(sub)
        # absorption probability into cls from each transient state
        if len(trans):
            T = M[np.ix_(trans, trans)]
            r = M[np.ix_(trans, cls)].sum(axis=1)
            if exact:
                rows = [[(1 if i == j else 0) - T[i, j] for j in range(len(trans))] for i in range(len(trans))]
                h = np.array([Fraction(int(v.numerator), int(v.denominator)) for v in solve(rows, list(r))],
                             dtype=object)
            else:
                h = np.linalg.solve(np.eye(len(trans)) - T, r)
            mass = initial[cls].sum() + (initial[trans] * h).sum()
        else:
            mass = initial[cls].sum()
        out[cls] = out[cls] + mass * pi
    return out


def _restrict(M, states):
    if states is None:
        return M
    states = np.asarray(states)
    sub = M[np.ix_(states, states)]
    total = sub.sum(axis=1)
    ok = all(v == 1 for v in total) if is_exact(M) else np.allclose(total, 1.0, atol=1e-12)
    if not ok:
        raise ValidationError("restriction of the chain is not closed")
    return sub


def mean_passage_first_step(M, states=None):
    """Mean first passage times from the first-step equations.

    ``n(i, j) = 1 + sum_{k != j} m(i, k) n(k, j)``; the diagonal is the mean
    return time. Requires an irreducible (possibly periodic) chain.
    """
    P = _restrict(M, states)
    st = chain_structure(P)
    if not st.irreducible:
        raise NotErgodic("mean passage times need an irreducible chain")
    m = P.shape[0]
    if is_exact(P):
        N = np.empty((m, m), dtype=object)
        for j in range(m):
            rows = [[(1 if i == k else 0) - (P[i, k] if k != j else 0) for k in range(m)] for i in range(m)]
            col = solve(rows, [1] * m)
            N[:, j] = [Fraction(int(v.numerator), int(v.denominator)) for v in col]
        return N
    P = np.asarray(P, dtype=float)
    N = np.empty((m, m))
    for j in range(m):
        Pj = P.copy()
        Pj[:, j] = 0.0
        N[:, j] = np.linalg.solve(np.eye(m) - Pj, np.ones(m))
    return N


def mean_passage(M, states=None, method="auto"):
    """Mean first passage matrix of an irreducible chain.

    The fundamental matrix ``Z = (I - M + 1 nu)^{-1}`` gives
    ``n(i, j) = (z_jj - z_ij) / nu_j`` off the diagonal and ``1 / nu_j`` on it.
    Periodic chains (and ``method="first_step"``) use the first-step system.
    ``states`` restricts the computation to a closed set of states.
    """
    P = _restrict(M, states)
    st = chain_structure(P)
    if not st.irreducible:
        raise NotErgodic("mean passage times need an irreducible chain")
    if method == "first_step" or (method == "auto" and not st.aperiodic):
        return mean_passage_first_step(P)
    if method not in ("auto", "fundamental"):
        raise ValidationError(f"unknown method {method!r}")
    nu = stationary(P)
    m = P.shape[0]
    if is_exact(P):
        base = [[(1 if i == j else 0) - P[i, j] + nu[j] for j in range(m)] for i in range(m)]
        Z = np.empty((m, m), dtype=object)
        for j in range(m):
            e = [1 if i == j else 0 for i in range(m)]
            col = solve(base, e)
            Z[:, j] = [Fraction(int(v.numerator), int(v.denominator)) for v in col]
        N = np.empty((m, m), dtype=object)
    else:
        Z = np.linalg.inv(np.eye(m) - np.asarray(P, dtype=float) + np.outer(np.ones(m), nu))
        N = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            N[i, j] = (Z[j, j] - Z[i, j]) / nu[j] + (1 / nu[j] if i == j else 0)
    return N


def time_average_rcr(t, strict=False):
    """Long-run choice probabilities ``p(x, A) = nu_A(N(x, A))``.

    Returns a one-period :class:`~cdru.jointchoice.ChoiceRule` on every
    nonempty menu (singletons trivially choose their only member).
    """
    from .jointchoice import ChoiceRule

    n = t.n
    space = order_space(n)
    exact = t.exact
    table = np.zeros((n, 1 << n), dtype=object if exact else float)
    if exact:
        table[:] = Fraction(0)
    for A in t.alts.menus(1):
        if len(members(A)) == 1:
            table[members(A)[0], A] = 1
            continue
        try:
            nu = stationary(menu_chain(t, A), strict=strict)
        except NotErgodic as exc:
            raise NotErgodic(f"menu {t.alts.menu_labels(A)}: {exc}") from None
        for x in members(A):
            table[x, A] = nu[space.best[:, A] == x].sum()
    return ChoiceRule(t.alts, table, T=1)


def _left_null_update(basis, block):
    """Restrict the span of ``basis`` (rows) to vectors ``v`` with ``v @ block == 0``."""
    k = len(basis)
    m = block.shape[1]
    C = [[sum((b[i] * block[i][j] for i in range(len(b)) if b[i] != 0), Q(0)) for j in range(m)] for b in basis]
    # lambda C = 0  <=>  C^T lambda = 0
    lam = nullspace([[C[r][j] for r in range(k)] for j in range(m)], k)
    return [[sum((l[r] * basis[r][i] for r in range(k) if l[r] != 0), Q(0)) for i in range(len(basis[0]))]
            for l in lam]


def common_invariant(blocks, m, exact=True, tol=1e-10):
    """Distribution ``nu`` with ``nu @ B = 0`` for every block, maximising ``min(nu)``.

    Parameters
    ----------
    blocks : iterable of arrays with ``m`` rows
    Returns
    -------
    (nu, eta) or None
        ``eta = min(nu)``; None when no distribution solves every block.
    """
    from . import lp

    if exact:
        basis = [[Q(1) if i == j else Q(0) for i in range(m)] for j in range(m)]
        for B in blocks:
            Bq = [[Q(to_fraction(v)) for v in row] for row in np.asarray(B, dtype=object)]
            basis = _left_null_update(basis, np.array(Bq, dtype=object))
            if not basis:
                return None
        k = len(basis)
        if k == 1:
            v = basis[0]
            s = sum(v, Q(0))
            if s == 0:
                return None
            nu = [x / s for x in v]
            if any(x < 0 for x in nu):
                return None
            nu = np.array([Fraction(int(x.numerator), int(x.denominator)) for x in nu], dtype=object)
            return nu, min(nu)
        # maximise eta over nu = lam @ basis >= eta, sum(nu) = 1, with lam split into +/- parts
        Bf = [[Fraction(int(x.numerator), int(x.denominator)) for x in row] for row in basis]
        nvar = 2 * k + 1
        A_ub = []
        for j in range(m):
            row = [-Bf[r][j] for r in range(k)] + [Bf[r][j] for r in range(k)] + [Fraction(1)]
            A_ub.append(row)
        sums = [sum(Bf[r][j] for j in range(m)) for r in range(k)]
        A_eq = [sums + [-s for s in sums] + [Fraction(0)]]
        c = [Fraction(0)] * (2 * k) + [Fraction(1)]
        out = lp.maximize(c, A_eq=A_eq, b_eq=[1], A_ub=A_ub, b_ub=[0] * m)
        if out is None:
            return None
        _, z = out
        lam = [z[r] - z[k + r] for r in range(k)]
        nu = np.array([sum(lam[r] * Bf[r][j] for r in range(k)) for j in range(m)], dtype=object)
        return nu, min(nu)
    stack = np.hstack([np.asarray(B, dtype=float) for B in blocks])
    u, s, vt = np.linalg.svd(stack.T)
    rank = int((s > tol * max(1.0, s.max() if s.size else 1.0)).sum())
    null = vt[rank:]
    if null.shape[0] == 0:
        return None
    from scipy.optimize import linprog

    k = null.shape[0]
    # variables lam (free, k) and eta; maximise eta
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-null.T, np.ones((m, 1))])
    A_eq = np.hstack([null.sum(axis=1)[None, :], np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(None, None)] * k + [(None, 1.0)], method="highs")
    if res.status != 0 or res.x[-1] < -tol:
        return None
    nu = res.x[:k] @ null
    nu[np.abs(nu) < tol] = 0.0
    return nu, float(nu.min())


def invariant_distribution_common(t, tol=1e-10):
    """Some ``nu`` with ``nu M_A = nu`` for every menu with two or more alternatives, else None.

    Exact kernels are solved exactly; float kernels within ``tol``.
    """
    m = t.m
    eye = np.eye(m, dtype=int)
    blocks = [menu_chain(t, A) - eye for A in t.alts.menus(2)]
    out = common_invariant(blocks, m, exact=t.exact, tol=tol)
    return None if out is None else out[0]


def joint_chain(t, s):
    """Transition matrix over states ``(menu i, order k)``, flattened as ``i * m + k``."""
    k = len(s.menus)
    m = t.m
    chains = np.stack([menu_chain(t, A) for A in s.menus])  # (k, m, m)
    P = s.matrix[:, None, :, None] * chains[:, :, None, :]
    return P.reshape(k * m, k * m)


def joint_stationary(t, s):
    """Stationary distribution ``psi[i, k]`` of the joint (menu, order) chain."""
    P = joint_chain(t, s)
    psi = stationary(P)
    return psi.reshape(len(s.menus), t.m)


def rho(s):
    """``R[i, j]``: probability that yesterday's menu was ``menus[j]`` given today's ``menus[i]``."""
    pi = stationary(s.matrix)
    k = len(s.menus)
    R = np.empty((k, k), dtype=s.matrix.dtype)
    for i in range(k):
        if pi[i] == 0:
            raise DegenerateDenominator(f"menu {s.menus[i]} has zero stationary mass")
        for j in range(k):
            R[i, j] = pi[j] * s.matrix[j, i] / pi[i]
    return R
