"""Menu invariance of a transition function.

Two characterisations are implemented side by side:

* local invariance: removing one alternative from a menu leaves the one-step
  order distribution unchanged, measured by a signed residual; its size
  bounds how far the stationary distributions of the two menus drift apart;
* no investment: there is no nonnegative plan of menu/order bets that pays
  off strictly in every state. The test returns either a common invariant
  distribution or such a plan, and verifies the certificate exactly.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lp
from ._exact import Q, is_exact, to_fraction
from .dynamics import (
    chain_structure,
    common_invariant,
    joint_stationary,
    mean_passage,
    menu_chain,
    rho,
    stationary,
)
from .errors import (
    DegenerateDenominator,
    InternalBreach,
    NotErgodic,
    RankDeficient,
    ValidationError,
)
from .lattice import members, order_space, popcount

__all__ = [
    "TOL",
    "MenuInvariance",
    "is_menu_invariant_direct",
    "LocalResidual",
    "local_residual",
    "local_residuals",
    "is_locally_invariant",
    "EquivalenceReport",
    "equivalence_check",
    "residual_gap_relation",
    "recover_gap",
    "RemovalPrediction",
    "passage_time_prediction",
    "removal_prediction",
    "InvestmentCertificate",
    "investment_matrix",
    "no_investment_test",
    "joint_investment_matrix",
    "joint_no_investment_test",
    "is_jointly_menu_invariant",
    "theorem1_check",
    "prop5_relation",
    "prop5_pseudoinverse",
    "prop6_predict",
]

TOL = 1e-10


def _zero(v, exact, tol):
    return v == 0 if exact else abs(v) <= tol


def _all_zero(vec, exact, tol):
    return all(_zero(v, exact, tol) for v in vec)


def _menus_top_down(alts, min_size=2):
    return sorted(alts.menus(min_size), key=lambda A: (-popcount(A), A))


# --- direct definition -------------------------------------------------------

@dataclass(frozen=True)
class MenuInvariance:
    """Outcome of the direct test.

    ``nu`` is the common invariant distribution when ``holds``; otherwise
    ``witness`` is a pair of menus whose invariant distributions differ
    (full-support path) and is None on the general path.
    """

    holds: bool
    nu: object = None
    witness: tuple = None
    full_support: bool = True

    def __bool__(self):
        return self.holds


def _unichain_witness(t, tol):
    """First pair ``(X, A)`` whose unique stationary distributions differ, if all are unique."""
    menus = _menus_top_down(t.alts)
    try:
        ref = stationary(menu_chain(t, menus[0]))
        for A in menus[1:]:
            if not _all_zero(stationary(menu_chain(t, A)) - ref, t.exact, tol):
                return (menus[0], A)
    except NotErgodic:
        return None
    return None


def is_menu_invariant_direct(t, tol=TOL):
    """Compare the stationary distributions of every menu chain.

    Full-support kernels have a unique stationary distribution per menu, and
    these are compared against the one for ``X``. Other kernels are menu
    invariant when a single distribution is invariant for every menu chain.
    """
    if not t.full_support:
        out = common_invariant(
            [menu_chain(t, A) - np.eye(t.m, dtype=int) for A in t.alts.menus(2)],
            t.m, exact=t.exact, tol=tol)
        if out is not None:
            return MenuInvariance(True, out[0], None, False)
        return MenuInvariance(False, None, _unichain_witness(t, tol), False)
    menus = _menus_top_down(t.alts)
    ref = stationary(menu_chain(t, menus[0]), strict=True)
    for A in menus[1:]:
        nu = stationary(menu_chain(t, A), strict=True)
        if not _all_zero(ref - nu, t.exact, tol):
            return MenuInvariance(False, None, (menus[0], A))
    return MenuInvariance(True, ref)


# --- local invariance --------------------------------------------------------

@dataclass(frozen=True)
class LocalResidual:
    """Signed gap between the one-step order distributions from ``A`` and ``A - {x}``."""

    menu: int
    removed: int
    eps: np.ndarray

    @property
    def exact(self):
        return is_exact(self.eps)

    def total(self):
        return sum(self.eps) if self.exact else float(np.sum(self.eps))

    def norm(self):
        return float(np.max(np.abs(np.asarray(self.eps, dtype=float))))

    def is_zero(self, tol=TOL):
        return _all_zero(self.eps, self.exact, tol)


def _check_removal(A, x, n):
    if A <= 0 or A >= 1 << n:
        raise ValidationError(f"invalid menu mask {A}")
    if not (A >> x) & 1:
        raise ValidationError("the removed alternative must belong to the menu")
    if popcount(A) < 3:
        raise ValidationError("local invariance is defined for menus with at least three alternatives")


def local_residual(t, nu, A, x):
    """Residual of the local invariance equation at menu ``A`` with ``x`` removed.

    Sums over orders picking ``x`` from ``A``: the mass sent by consuming
    ``x`` minus the mass sent by consuming each order's runner-up in ``A``.
    """
    _check_removal(A, x, t.n)
    space = order_space(t.n)
    nu = np.asarray(nu)
    exact = t.exact or is_exact(nu)
    eps = np.array([Fraction(0)] * t.m, dtype=object) if exact else np.zeros(t.m)
    rest = A & ~(1 << x)
    picks = np.nonzero(space.best[:, A] == x)[0]
    for k in picks:
        w = nu[k]
        if w == 0:
            continue
        y = int(space.best[k, rest])
        eps = eps + w * (t.kernel[x, k] - t.kernel[y, k])
    return LocalResidual(A, x, eps)


def local_residuals(t, nu):
    """Residuals for every menu with three or more alternatives and every removal."""
    for A in _menus_top_down(t.alts, 3):
        for x in members(A):
            yield local_residual(t, nu, A, x)


def is_locally_invariant(t, nu, tol=TOL):
    return all(r.is_zero(tol) for r in local_residuals(t, nu))


@dataclass(frozen=True)
class EquivalenceReport:
    """Local invariance at ``nu_A`` against the direct test; the two verdicts must agree."""

    menu: int
    nu: np.ndarray
    locally_invariant: bool
    menu_invariant: bool
    witness: tuple = None

    @property
    def agree(self):
        return self.locally_invariant == self.menu_invariant


def equivalence_check(t, A=None, tol=TOL):
    if not t.full_support:
        raise ValidationError("the equivalence check needs a full-support transition function")
    A = t.alts.full if A is None else A
    nu = stationary(menu_chain(t, A), strict=True)
    local = is_locally_invariant(t, nu, tol)
    direct = is_menu_invariant_direct(t, tol)
    report = EquivalenceReport(A, nu, local, direct.holds, direct.witness)
    if not report.agree:
        raise InternalBreach(f"local ({local}) and direct ({direct.holds}) invariance disagree")
    return report


# --- size of invariance failures ---------------------------------------------

def residual_gap_relation(nuA, nuAx, MA, MAx):
    """``(eps_A, eps_Ax, residual)`` where both residuals use ``D = M_A - M_{A-x}``.

    ``residual`` is the largest entry of ``eps_A - eps_Ax - (nu_A - nu_Ax) D``.
    """
    D = np.asarray(MA) - np.asarray(MAx)
    epsA = np.asarray(nuA) @ D
    epsAx = np.asarray(nuAx) @ D
    gap = epsA - epsAx - (np.asarray(nuA) - np.asarray(nuAx)) @ D
    return epsA, epsAx, float(np.max(np.abs(np.asarray(gap, dtype=float))))


def recover_gap(epsA, epsAx, MA, MAx, tol=1e-9):
    """Recover ``nu_A - nu_{A-x}`` from the residual gap through a pseudoinverse.

    The gap ``g`` solves ``g D = eps_A - eps_{A-x}`` with ``D = M_A - M_{A-x}``
    and sums to zero, so it is read off ``[D | 1]``. Recovery is unique when
    that matrix has full row rank; otherwise :class:`RankDeficient` is raised.
    """
    D = np.asarray(MA, dtype=float) - np.asarray(MAx, dtype=float)
    m = D.shape[0]
    aug = np.hstack([D, np.ones((m, 1))])
    sv = np.linalg.svd(aug, compute_uv=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    if rank < m:
        raise RankDeficient(f"[D | 1] has rank {rank}; recovery needs {m}")
    rhs = np.append(np.asarray(epsA, dtype=float) - np.asarray(epsAx, dtype=float), 0.0)
    return rhs @ np.linalg.pinv(aug)


@dataclass(frozen=True)
class RemovalPrediction:
    """Predicted ``nu_{A-x}`` and the matrix-form distribution gap ``nu_A - nu_{A-x}``."""

    predicted: np.ndarray
    difference: np.ndarray
    states: tuple


def passage_time_prediction(nuA, epsA, N, states=None, tol=1e-12):
    """Stationary distribution of ``M_{A-x}`` from ``nu_A``, the residual and passage times.

    ``N`` holds mean first passage times of ``M_{A-x}`` (return times on the
    diagonal). ``states`` lists the recurrent class ``N`` refers to; entries
    outside it are predicted zero, and both ``nu_A`` and the residual must
    vanish there.
    """
    nuA = np.asarray(nuA)
    epsA = np.asarray(epsA)
    N = np.asarray(N)
    exact = is_exact(N) or is_exact(nuA)
    m = len(nuA)
    states = tuple(range(m)) if states is None else tuple(states)
    if N.shape != (len(states), len(states)):
        raise ValidationError("passage matrix does not match the state list")
    outside = [k for k in range(m) if k not in set(states)]
    if not _all_zero([nuA[k] for k in outside] + [epsA[k] for k in outside], exact, tol):
        raise ValidationError("distribution and residual must live on the recurrent class")
    zero = Fraction(0) if exact else 0.0
    pred = np.array([zero] * m, dtype=object if exact else float)
    diff = np.array([zero] * m, dtype=object if exact else float)
    e = [epsA[k] for k in states]
    for j, k in enumerate(states):
        s = sum((e[i] * N[i, j] for i in range(len(states)) if i != j), zero)
        denom = 1 - s
        if (denom == 0) if exact else abs(denom) <= tol:
            raise DegenerateDenominator(f"denominator vanishes at order {k}")
        pred[k] = nuA[k] / denom
        diff[k] = -s / N[j, j]
    return RemovalPrediction(pred, diff, states)


def removal_prediction(t, A, x, tol=1e-12):
    """Run the passage-time prediction for removing ``x`` from ``A``.

    Returns ``(prediction, nu_A, nu_{A-x}, eps_A)``; ``nu_{A-x}`` is computed
    directly as the oracle. Transient orders of ``M_{A-x}`` are left out of
    the passage matrix.
    """
    MA = menu_chain(t, A)
    MAx = menu_chain(t, A & ~(1 << x))
    st = chain_structure(MAx)
    if not st.unichain:
        raise NotErgodic("the reduced menu chain has several recurrent classes")
    states = tuple(sorted(st.recurrent[0]))
    if not st.aperiodic:
        raise NotErgodic("the reduced menu chain is periodic")
    nuA = stationary(MA)
    nuAx = stationary(MAx)
    eps = np.asarray(nuA) @ (np.asarray(MA) - np.asarray(MAx))
    N = mean_passage(MAx, states=states)
    return passage_time_prediction(nuA, eps, N, states, tol), nuA, nuAx, eps


# --- no investment -----------------------------------------------------------

@dataclass(frozen=True)
class InvestmentCertificate:
    """Either an invariant distribution or an investment plan that pays off in every state.

    ``kind`` is ``"invariant"`` or ``"plan"``. Plans are keyed by
    ``(column group, order index)``; column groups are menu masks.
    ``strict`` tells whether an invariant witness is strictly positive.
    """

    kind: str
    matrix: np.ndarray = field(repr=False)
    columns: tuple = field(repr=False)
    nu: np.ndarray = None
    plan: dict = None
    strict: bool = False

    @property
    def invariant(self):
        return self.kind == "invariant"

    def verify(self):
        G = [[Q(to_fraction(v)) for v in row] for row in self.matrix]
        if self.invariant:
            nu = [Q(to_fraction(v)) for v in self.nu]
            if any(v < 0 for v in nu) or sum(nu, Q(0)) != 1:
                return False
            ncol = len(self.columns)
            return all(sum((nu[r] * G[r][c] for r in range(len(G))), Q(0)) == 0 for c in range(ncol))
        col = {key: j for j, key in enumerate(self.columns)}
        vec = [Q(0)] * len(self.columns)
        for key, v in self.plan.items():
            v = Q(to_fraction(v))
            if v < 0:
                return False
            vec[col[key]] = v
        if all(v == 0 for v in vec):
            return False
        return all(sum((a * b for a, b in zip(row, vec) if b != 0), Q(0)) > 0 for row in G)


def _blocks_matrix(blocks, m):
    eye = np.eye(m, dtype=int)
    return np.hstack([B - eye for B in blocks])


def investment_matrix(t):
    """Rows are orders; column ``(A, k')`` pays ``t_k'(M(k, A), k) - 1{k = k'}``."""
    menus = t.alts.menus(2)
    kernel = t.kernel if t.exact else t.to_exact().kernel
    blocks = [kernel[order_space(t.n).best[:, A], np.arange(t.m)] for A in menus]
    cols = tuple((A, k) for A in menus for k in range(t.m))
    return _blocks_matrix(blocks, t.m), cols


def _certificate(G, cols, m):
    blocks = [G[:, j:j + m] for j in range(0, G.shape[1], m)]
    out = common_invariant(blocks, m, exact=True)
    if out is not None:
        nu, eta = out
        cert = InvestmentCertificate("invariant", G, cols, nu=nu, strict=eta > 0)
    else:
        i = lp.strictly_positive_combination(G)
        if i is None:
            raise InternalBreach("neither an invariant distribution nor an investment plan was found")
        plan = {cols[j]: v for j, v in enumerate(i) if v != 0}
        cert = InvestmentCertificate("plan", G, cols, plan=plan)
    if not cert.verify():
        raise InternalBreach("investment certificate failed exact verification")
    return cert


def no_investment_test(t):
    """Exact alternative: an invariant distribution for every menu chain, or a strict plan.

    Float kernels are snapped to rationals (rows renormalised) first.
    """
    G, cols = investment_matrix(t)
    return _certificate(G, cols, t.m)


def joint_investment_matrix(t, s):
    """Columns ``(A, k')`` pay ``sum_B rho(B | A) t_k'(M(k, B), k) - 1{k = k'}``."""
    tq = t if t.exact else t.to_exact()
    if not is_exact(s.matrix):
        from .dynamics import ArrivalFunction
        from ._exact import fraction_array, snap_rational

        rows = fraction_array([[snap_rational(v) for v in r] for r in s.matrix])
        rows = np.array([r / sum(r) for r in rows])
        s = ArrivalFunction(s.alts, rows, s.menus)
    R = rho(s)
    chains = [menu_chain(tq, B) for B in s.menus]
    blocks = []
    for i in range(len(s.menus)):
        acc = np.array([[Fraction(0)] * t.m for _ in range(t.m)], dtype=object)
        for j, M in enumerate(chains):
            if R[i, j] != 0:
                acc = acc + R[i, j] * M
        blocks.append(acc)
    cols = tuple((A, k) for A in s.menus for k in range(t.m))
    return _blocks_matrix(blocks, t.m), cols


def joint_no_investment_test(t, s):
    if not (t.full_support and s.full_support):
        raise ValidationError("the joint test needs full-support transition and arrival functions")
    G, cols = joint_investment_matrix(t, s)
    return _certificate(G, cols, t.m)


def is_jointly_menu_invariant(t, s, tol=TOL):
    """Does the stationary joint menu/order distribution factor into its marginals?"""
    if not (t.full_support and s.full_support):
        raise ValidationError("joint invariance needs full-support transition and arrival functions")
    if chain_structure(s.matrix).recurrent and not chain_structure(s.matrix).ergodic:
        raise NotErgodic("arrival chain is not ergodic")
    psi = joint_stationary(t, s)
    pi = psi.sum(axis=1)
    nu = psi.sum(axis=0)
    prod = np.outer(pi, nu)
    return _all_zero((psi - prod).reshape(-1), is_exact(psi), tol)


# names used by the published interface
theorem1_check = equivalence_check
prop5_relation = residual_gap_relation
prop5_pseudoinverse = recover_gap
prop6_predict = passage_time_prediction
