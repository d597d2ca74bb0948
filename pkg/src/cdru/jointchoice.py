"""Random joint choice rules over ``T`` periods and their recursive-utility representation.

A rule is a dense table with axes ``(x1, A1, ..., xT, AT)`` (see
:mod:`cdru.lattice`) plus the set of observed menu tuples. The module
checks the three behavioural axioms (complete monotonicity, marginality,
choice-set independence), builds the per-history flow graphs on the subset
lattice, peels them into distributions over orders, and verifies recovered
representations by forward simulation.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._exact import fraction_array, is_exact, to_fraction
from .errors import IncompleteDomain, InternalBreach, NotRepresentable, ValidationError
from .lattice import members, mobius, order_space, valid_cells, zeta

__all__ = [
    "ChoiceRule",
    "CdruModel",
    "CdruRepresentation",
    "HistoryGraph",
    "forward_rule",
    "forward_rule_nsets",
    "iset_mobius",
    "truncate",
    "check_complete_monotonicity",
    "check_marginality",
    "check_choice_set_independence",
    "increasing_differences_violations",
    "history_graphs",
    "decompose_graph",
    "decompose",
    "verify_representation",
    "identification_check",
    "joint_from_ccp",
]

TOL = 1e-10


def _zero_table(n, T, exact):
    shape = (n, 1 << n) * T
    if exact:
        out = np.empty(shape, dtype=object)
        out[:] = Fraction(0)
        return out
    return np.zeros(shape)


def _interleave(xs, As):
    return tuple(v for pair in zip(xs, As) for v in pair)


def _is_zero(v, exact, tol):
    return v == 0 if exact else abs(v) <= tol


class ChoiceRule:
    """Random (joint) choice rule of arity ``T``.

    Parameters
    ----------
    alts : AlternativeSet
    table : array_like
        Dense table with axes ``(x1, A1, ..., xT, AT)``.
    T : int, optional
        Inferred from ``table.ndim`` when omitted.
    observed : iterable of tuple of int, optional
        Observed menu tuples; None means the full domain of nonempty menus.
    """

    def __init__(self, alts, table, T=None, observed=None, validate=True, tol=TOL):
        self.alts = alts
        table = np.asarray(table)
        if table.dtype != object:
            table = table.astype(np.float64)
        self.T = T if T is not None else table.ndim // 2
        n = alts.n
        if table.shape != (n, 1 << n) * self.T:
            raise ValidationError(f"table must have shape {(n, 1 << n) * self.T}, got {table.shape}")
        self.table = table
        full = [tuple(c) for c in itertools.product(alts.menus(1), repeat=self.T)]
        if observed is None:
            self.observed = tuple(full)
            self.full_domain = True
        else:
            obs = sorted({tuple(int(a) for a in At) for At in observed})
            if any(len(At) != self.T or any(not 0 < a <= alts.full for a in At) for At in obs):
                raise ValidationError("observed menu tuples must have length T and nonempty menus")
            self.observed = tuple(obs)
            self.full_domain = len(obs) == len(full)
        if validate:
            self.validate(tol)

    @property
    def n(self):
        return self.alts.n

    @property
    def exact(self):
        return is_exact(self.table)

    def validate(self, tol=TOL):
        if (~valid_cells(self.n, self.T) & (self.table != 0)).any():
            raise ValidationError("choice table has mass on an alternative outside its menu")
        for At in self.observed:
            block = self.block(At)
            if self.exact:
                if any(v < 0 for v in block.flat):
                    raise ValidationError(f"negative probability at menus {At}")
                if sum(block.flat) != 1:
                    raise ValidationError(f"probabilities at menus {At} sum to {sum(block.flat)}")
            else:
                if (block < -tol).any():
                    raise ValidationError(f"negative probability at menus {At}")
                if abs(block.sum() - 1.0) > max(tol, 1e-9):
                    raise ValidationError(f"probabilities at menus {At} sum to {block.sum()!r}")

    def block(self, At):
        """Array over ``(x1, ..., xT)`` for the menu tuple ``At``."""
        idx = []
        for A in At:
            idx.extend([slice(None), A])
        return self.table[tuple(idx)]

    def value(self, xs, As):
        return self.table[_interleave(xs, As)]

    def cells(self):
        """Observed ``(xs, As, p)`` triples with ``x_i`` in ``A_i``."""
        for At in self.observed:
            for xs in itertools.product(*[members(A) for A in At]):
                yield xs, At, self.table[_interleave(xs, At)]

    def to_float(self):
        return ChoiceRule(self.alts, self.table.astype(np.float64), self.T,
                          None if self.full_domain else self.observed, validate=False)

    def to_exact(self, max_denominator=None):
        if self.exact:
            return self
        tab = np.empty(self.table.shape, dtype=object)
        for idx, v in np.ndenumerate(self.table):
            f = Fraction(float(v))
            tab[idx] = f.limit_denominator(max_denominator) if max_denominator else f
        return ChoiceRule(self.alts, tab, self.T, None if self.full_domain else self.observed, validate=False)

    def restrict(self, observed):
        """Same table, fewer observed menu tuples."""
        keep = set(map(tuple, observed))
        if not keep <= set(self.observed):
            raise ValidationError("restriction must use observed menu tuples")
        tab = _zero_table(self.n, self.T, self.exact)
        for At in keep:
            idx = []
            for A in At:
                idx.extend([slice(None), A])
            tab[tuple(idx)] = self.table[tuple(idx)]
        return ChoiceRule(self.alts, tab, self.T, keep, validate=False)

    @classmethod
    def from_cells(cls, alts, T, cells, observed=None, exact=True):
        """Build from ``{(xs, As): p}``; missing cells of observed tuples are zero."""
        tab = _zero_table(alts.n, T, exact)
        seen = set()
        for (xs, As), v in cells.items():
            if len(xs) != T or len(As) != T:
                raise ValidationError("cell arity does not match T")
            if any(not (A >> x) & 1 for x, A in zip(xs, As)):
                raise ValidationError(f"choice {xs} not in menus {As}")
            tab[_interleave(xs, As)] = to_fraction(v) if exact else float(v)
            seen.add(tuple(As))
        return cls(alts, tab, T, observed if observed is not None else seen)

    def require_full(self, what):
        if not self.full_domain:
            raise IncompleteDomain(f"{what} needs observations on every menu tuple")


@dataclass
class CdruModel:
    """First-period distribution ``first`` over orders plus a history kernel.

    ``kernel(xs, ks)`` returns the distribution over the next order after
    consumption history ``xs`` and order history ``ks`` (order indices).
    """

    alts: object
    T: int
    first: np.ndarray
    kernel: object

    def transition(self, xs, ks):
        return self.kernel(tuple(xs), tuple(ks))


@dataclass
class CdruRepresentation:
    """Representation recovered by :func:`decompose`.

    Kernels are stored per I-class history: ``kernels[(xs, As)]`` is used for
    every order history ``ks`` with ``k_i`` in ``I(x_i, A_i)``. Histories
    never materialised get the uniform distribution.
    """

    alts: object
    T: int
    first: np.ndarray
    kernels: dict = field(default_factory=dict)
    state_independent: bool = False
    si_kernels: dict = field(default_factory=dict)

    def _uniform(self):
        m = self.alts.space.m
        if is_exact(self.first):
            return np.array([Fraction(1, m)] * m, dtype=object)
        return np.full(m, 1.0 / m)

    def kernel(self, xs, ks):
        xs = tuple(xs)
        if self.state_independent:
            out = self.si_kernels.get(xs)
            return self._uniform() if out is None else out
        imenu = self.alts.space.imenu
        As = tuple(int(imenu[k, x]) for x, k in zip(xs, ks))
        out = self.kernels.get((xs, As))
        return self._uniform() if out is None else out

    def as_model(self):
        return CdruModel(self.alts, self.T, self.first, self.kernel)


def _as_model(model):
    if isinstance(model, CdruRepresentation):
        return model.as_model()
    return model


def _markov(t):
    kern = t.kernel
    return lambda xs, ks: kern[xs[-1], ks[-1]]


def _model_from(alts, nu, kernel, T):
    from .dynamics import TransitionFunction

    if isinstance(kernel, TransitionFunction):
        kernel = _markov(kernel)
    return CdruModel(alts, T, np.asarray(nu), kernel)


def _cached(kernel):
    cache = {}

    def f(xs, ks):
        key = (xs, ks)
        if key not in cache:
            cache[key] = np.asarray(kernel(xs, ks))
        return cache[key]

    return f


def iset_mobius(model):
    """Moebius table implied by a model through I-set sums (arity ``model.T``)."""
    model = _as_model(model)
    alts, T = model.alts, model.T
    n = alts.n
    space = alts.space
    exact = is_exact(model.first)
    q = _zero_table(n, T, exact)
    kernel = _cached(model.kernel)

    def rec(tau, xs, ks, As, w):
        if tau == T:
            q[_interleave(xs, As)] += w
            return
        dist = model.first if tau == 0 else kernel(xs, ks)
        for k in np.flatnonzero(np.asarray(dist != 0, dtype=bool)):
            wk = w * dist[k]
            for x in range(n):
                rec(tau + 1, xs + (x,), ks + (int(k),), As + (int(space.imenu[k, x]),), wk)

    rec(0, (), (), (), Fraction(1) if exact else 1.0)
    return q


def forward_rule(alts, nu, kernel, T):
    """Choice rule generated by first-period ``nu`` and a history kernel (I-set route).

    ``kernel`` is either a :class:`~cdru.dynamics.TransitionFunction` (used
    as a Markov kernel on the last consumption and order) or a callable
    ``kernel(xs, ks)``.
    """
    model = _model_from(alts, nu, kernel, T)
    q = iset_mobius(model)
    return ChoiceRule(alts, zeta(q, T), T)


def forward_rule_nsets(model):
    """Choice rule of a model by direct summation over the sets ``N(x, A)``."""
    model = _as_model(model)
    alts, T = model.alts, model.T
    n = alts.n
    best = alts.space.best
    exact = is_exact(model.first)
    p = _zero_table(n, T, exact)
    kernel = _cached(model.kernel)
    all_menus = alts.menus(1)

    def rec(tau, xs, ks, As, w):
        if tau == T:
            p[_interleave(xs, As)] += w
            return
        dist = model.first if tau == 0 else kernel(xs, ks)
        for k in np.flatnonzero(np.asarray(dist != 0, dtype=bool)):
            wk = w * dist[k]
            for A in all_menus:
                rec(tau + 1, xs + (int(best[k, A]),), ks + (int(k),), As + (A,), wk)

    rec(0, (), (), (), Fraction(1) if exact else 1.0)
    return ChoiceRule(alts, p, T)


def truncate(p, tau):
    """Arity-``tau`` marginal: later periods face ``X`` and their choices are summed out."""
    p.require_full("truncation")
    tab = p.table
    full = p.alts.full
    for _ in range(p.T - tau):
        tab = tab[..., :, full].sum(axis=-1)
    return ChoiceRule(p.alts, tab, tau, validate=False)


@dataclass
class AxiomReport:
    axiom: str
    holds: bool
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"axiom": self.axiom, "holds": self.holds,
                "violations": [str(v) for v in self.violations[:50]],
                "n_violations": len(self.violations), **self.details}


def check_complete_monotonicity(p, tol=TOL):
    """All Moebius inverses nonnegative (exactly, or above ``-tol`` for floats).

    On a limited two-period domain the check asks whether the observed cells
    extend to a full-domain rule with nonnegative Moebius inverse and
    marginality; observed regularity and increasing-differences failures are
    listed as violations.
    """
    if not p.full_domain:
        return _limited_monotonicity(p, tol)
    q = mobius(p.table, p.T)
    valid = valid_cells(p.n, p.T)
    bad = []
    for idx in zip(*np.nonzero(valid)):
        v = q[idx]
        if (v < 0) if p.exact else (v < -tol):
            xs, As = idx[0::2], idx[1::2]
            bad.append((tuple(int(x) for x in xs), tuple(int(A) for A in As), v))
    return AxiomReport("complete_monotonicity", not bad, bad)


def _constant_over_last_menu(S, exact, tol):
    """Prefix indices where ``S[..., B]`` is not constant over nonempty ``B``."""
    body = S[..., 1:]
    if exact:
        first = body[..., :1]
        diff = np.vectorize(lambda v: v != 0, otypes=[bool])(body - first)
        return np.argwhere(diff.any(axis=-1))
    return np.argwhere((body.max(axis=-1) - body.min(axis=-1)) > tol)


def check_marginality(p, tol=TOL):
    """Marginality at every level, in the sum form and in the Moebius (flow) form.

    The sum form asks that ``sum_{y in B} p(prefix, y, prefix menus, B)`` not
    depend on ``B``; the flow form asks
    ``sum_{y in B} q(.., y, .., B) = sum_{z not in B} q(.., z, .., B + z)``
    for nonempty proper ``B``. Both verdicts are returned and must agree.
    """
    if p.T < 2:
        return AxiomReport("marginality", True, details={"flow_form_holds": True})
    if not p.full_domain:
        return _limited_marginality(p, tol)
    n, exact = p.n, p.exact
    full = p.alts.full
    tab = p.table
    sum_bad, flow_bad = [], []
    level_tab = tab
    for tau in range(p.T, 1, -1):
        S = level_tab.sum(axis=-2)
        for idx in _constant_over_last_menu(S, exact, tol):
            sum_bad.append((tau, tuple(int(i) for i in idx)))
        q = mobius(level_tab, tau)
        for B in range(1, full):
            lhs = sum(q[..., y, B] for y in members(B))
            rhs = sum(q[..., z, B | (1 << z)] for z in range(n) if not (B >> z) & 1)
            d = lhs - rhs
            if exact:
                nz = np.argwhere(np.vectorize(lambda v: v != 0, otypes=[bool])(d))
            else:
                nz = np.argwhere(np.abs(d) > tol)
            for idx in nz:
                prefix = tuple(int(i) for i in idx)
                if _valid_prefix(prefix):
                    flow_bad.append((tau, prefix, B))
        level_tab = S[..., full]
    holds = not sum_bad
    return AxiomReport("marginality", holds, sum_bad,
                       details={"flow_form_holds": not flow_bad, "flow_violations": len(flow_bad)})


def _valid_prefix(prefix):
    return all((A >> x) & 1 for x, A in zip(prefix[0::2], prefix[1::2]))


def check_choice_set_independence(p, tol=1e-9):
    """Conditional next-period choice ratios do not depend on past menus.

    For every level ``tau``, consumption history ``xs`` and next cell
    ``(y, B)``, the ratio ``p_{tau+1}(xs, y, As, B) / p_tau(xs, As)`` must be the
    same for every menu history ``As`` with ``p_tau(xs, As) > 0``.
    """
    if p.T < 2:
        return AxiomReport("choice_set_independence", True)
    if not p.full_domain:
        return _limited_csi(p, tol)
    n, exact = p.n, p.exact
    levels = {p.T: p.table}
    for tau in range(p.T - 1, 0, -1):
        levels[tau] = truncate(p, tau).table
    bad = []
    for tau in range(1, p.T):
        cur, nxt = levels[tau], levels[tau + 1]
        for xs in itertools.product(range(n), repeat=tau):
            ratios = None
            for As in itertools.product(range(1, 1 << n), repeat=tau):
                idx = _interleave(xs, As)
                if not all((A >> x) & 1 for x, A in zip(xs, As)):
                    continue
                base = cur[idx]
                if _is_zero(base, exact, tol) or base < 0:
                    continue
                r = nxt[idx] / base
                if ratios is None:
                    ratios = (As, r)
                    continue
                d = r - ratios[1]
                if exact:
                    off = np.argwhere(np.vectorize(lambda v: v != 0, otypes=[bool])(d))
                else:
                    off = np.argwhere(np.abs(d) > tol)
                for y, B in off:
                    if (B >> y) & 1:
                        bad.append((xs, ratios[0], As, (int(y), int(B))))
    return AxiomReport("choice_set_independence", not bad, bad)


def _differs(a, b, exact, tol):
    return a != b if exact else abs(a - b) > tol


def _last_sums(p, As):
    """``sum over the last choice`` for one observed menu tuple, keyed by earlier choices."""
    n = p.n
    out = {}
    for xs in itertools.product(*(members(A) for A in As[:-1])):
        idx = _interleave(xs, As[:-1])
        out[xs] = sum(p.table[idx + (y, As[-1])] for y in members(As[-1]))
    return out


def _limited_marginality(p, tol):
    """Earlier choices must not depend on the last menu, across observed tuples."""
    groups = {}
    for As in p.observed:
        groups.setdefault(As[:-1], []).append(As)
    bad = []
    for prefix, tuples in groups.items():
        ref = _last_sums(p, tuples[0])
        for As in tuples[1:]:
            cur = _last_sums(p, As)
            for xs, v in ref.items():
                if _differs(v, cur[xs], p.exact, tol):
                    bad.append((xs, tuples[0], As))
    return AxiomReport("marginality", not bad, bad, details={"domain": "limited"})


def _limited_csi(p, tol):
    """Last-period conditional choice must not depend on earlier menus, across observed tuples."""
    seen = {}
    bad = []
    for As in p.observed:
        sums = _last_sums(p, As)
        for xs, base in sums.items():
            if _is_zero(base, p.exact, tol):
                continue
            key = (xs, As[-1])
            ratios = {y: p.table[_interleave(xs, As[:-1]) + (y, As[-1])] / base for y in members(As[-1])}
            if key not in seen:
                seen[key] = (As, ratios)
                continue
            ref_As, ref = seen[key]
            for y in ratios:
                if _differs(ratios[y], ref[y], p.exact, tol):
                    bad.append((xs, ref_As[:-1], As[:-1], (y, As[-1])))
    return AxiomReport("choice_set_independence", not bad, bad, details={"domain": "limited"})


def _limited_monotonicity(p, tol):
    if p.T != 2:
        raise IncompleteDomain("limited-domain monotonicity is implemented for two periods")
    from .hypotest import test_mobius

    obs = set(p.observed)
    bad = []
    for (A, B), (A2, B2) in itertools.permutations(sorted(obs), 2):
        if A & A2 != A or B & B2 != B:
            continue
        for x in members(A):
            for y in members(B):
                a, b = p.table[x, A, y, B], p.table[x, A2, y, B2]
                if (a < b) if p.exact else (a < b - tol):
                    bad.append(("regularity", (x, y), (A, B), (A2, B2)))
    for A, A2 in itertools.permutations(sorted({a for a, _ in obs}), 2):
        if A & A2 != A:
            continue
        for B, B2 in itertools.permutations(sorted({b for _, b in obs}), 2):
            if B & B2 != B or not {(A, B), (A, B2), (A2, B), (A2, B2)} <= obs:
                continue
            for x in members(A):
                for y in members(B):
                    lhs = p.table[x, A, y, B] - p.table[x, A, y, B2]
                    rhs = p.table[x, A2, y, B] - p.table[x, A2, y, B2]
                    if (lhs < rhs) if p.exact else (lhs < rhs - tol):
                        bad.append(("increasing_differences", (x, y), (A, A2), (B, B2)))
    verdict = test_mobius(p if p.exact else p.to_exact(), limited=True)
    holds = verdict.consistent
    if bad and holds:
        raise InternalBreach("observed monotonicity failures but the data extend consistently")
    return AxiomReport("complete_monotonicity", holds, bad,
                       details={"domain": "limited", "extension_exists": holds})


def increasing_differences_violations(p, tol=TOL):
    """Two-period diagnostic: ``p(A,B) - p(A,B') >= p(A',B) - p(A',B')`` for ``A <= A'``, ``B <= B'``."""
    if p.T != 2:
        raise ValidationError("increasing differences is a two-period diagnostic")
    p.require_full("increasing differences")
    n = p.n
    out = []
    all_menus = p.alts.menus(1)
    for x, y in itertools.product(range(n), repeat=2):
        As = [A for A in all_menus if (A >> x) & 1]
        Bs = [B for B in all_menus if (B >> y) & 1]
        for A, A2 in itertools.product(As, As):
            if A & A2 != A or A == A2:
                continue
            for B, B2 in itertools.product(Bs, Bs):
                if B & B2 != B or B == B2:
                    continue
                lhs = p.table[x, A, y, B] - p.table[x, A, y, B2]
                rhs = p.table[x, A2, y, B] - p.table[x, A2, y, B2]
                if (lhs < rhs) if p.exact else (lhs < rhs - tol):
                    out.append((x, y, A, A2, B, B2))
    return out


@dataclass
class HistoryGraph:
    """Flow network on the subset lattice for one (possibly empty) history.

    ``capacity[(B, y)]`` labels the edge ``B -> B - {y}``.
    """

    history: tuple
    capacity: dict
    outflow: object

    @property
    def n_nodes(self):
        n = max((B.bit_length() for B, _ in self.capacity), default=0)
        return 1 << n

    @property
    def n_edges(self):
        return len(self.capacity)


def _levels(p):
    p.require_full("the graphical construction")
    qs = {p.T: mobius(p.table, p.T)}
    for tau in range(1, p.T):
        qs[tau] = mobius(truncate(p, tau).table, tau)
    return qs


def history_graphs(p, tau=None, positive_only=True, tol=TOL):
    """Flow graphs for histories of length ``tau`` (all lengths ``0..T-1`` when None)."""
    qs = _levels(p)
    n = p.n
    exact = p.exact
    lengths = range(p.T) if tau is None else [tau]
    out = []
    for L in lengths:
        q_next = qs[L + 1]
        for xs in itertools.product(range(n), repeat=L):
            for As in itertools.product(range(1, 1 << n), repeat=L):
                if not all((A >> x) & 1 for x, A in zip(xs, As)):
                    continue
                g = _graph(q_next, xs, As, n)
                if positive_only and _is_zero(g.outflow, exact, tol):
                    continue
                out.append(g)
    return out


def _graph(q_next, xs, As, n):
    prefix = _interleave(xs, As)
    cap = {}
    full = (1 << n) - 1
    for B in range(1, 1 << n):
        for y in members(B):
            cap[(B, y)] = q_next[prefix + (y, B)]
    outflow = sum(cap[(full, y)] for y in range(n))
    return HistoryGraph((tuple(xs), tuple(As)), cap, outflow)


def decompose_graph(graph, n, exact, tol=TOL):
    """Peel the normalised flow into a distribution over orders.

    Repeatedly takes the lexicographically smallest (by node bitmask) path
    ``X -> ... -> {}`` of positive edges, credits its bottleneck to the order
    listing the removed alternatives best-first, and subtracts the bottleneck.
    """
    space = order_space(n)
    m = space.m
    full = (1 << n) - 1
    zero = Fraction(0) if exact else 0.0
    if _is_zero(graph.outflow, exact, tol):
        return np.array([Fraction(1, m)] * m, dtype=object) if exact else np.full(m, 1.0 / m)
    cap = {e: v / graph.outflow for e, v in graph.capacity.items()}
    if any((v < 0) if exact else (v < -tol) for v in cap.values()):
        raise NotRepresentable(f"history {graph.history} has a negative edge capacity")
    dist = np.array([zero] * m, dtype=object if exact else float)

    def positive(v):
        return v > 0 if exact else v > tol

    while True:
        memo = {}

        def reach(B):
            if B == 0:
                return []
            if B in memo:
                return memo[B]
            memo[B] = None
            for y in sorted(members(B), reverse=True):
                if positive(cap[(B, y)]):
                    rest = reach(B & ~(1 << y))
                    if rest is not None:
                        memo[B] = [y] + rest
                        break
            return memo[B]

        path = reach(full)
        if path is None:
            break
        nodes = []
        B = full
        for y in path:
            nodes.append((B, y))
            B &= ~(1 << y)
        amount = min(cap[e] for e in nodes)
        for e in nodes:
            cap[e] -= amount
            if not exact and cap[e] < tol:
                cap[e] = 0.0
        dist[space.index[tuple(path)]] += amount
    leftover = [v for v in cap.values() if positive(v)]
    if leftover:
        raise NotRepresentable(f"history {graph.history}: flow is not conserved")
    total = dist.sum()
    if exact:
        if total != 1:
            raise NotRepresentable(f"history {graph.history}: peeled mass {total} != 1")
    else:
        if abs(total - 1.0) > 1e-8:
            raise NotRepresentable(f"history {graph.history}: peeled mass {total} != 1")
        dist = dist / total
    return dist


def decompose(p, state_independent=False, tol=TOL, check_axioms=True):
    """Recover a representation from a rule on the full domain.

    Raises
    ------
    NotRepresentable
        When complete monotonicity or marginality (or, with
        ``state_independent``, choice-set independence) fails.
    """
    p.require_full("decomposition")
    if check_axioms:
        cm = check_complete_monotonicity(p, tol)
        if not cm.holds:
            raise NotRepresentable(f"complete monotonicity fails at {len(cm.violations)} cells")
        mg = check_marginality(p, tol)
        if not mg.holds:
            raise NotRepresentable(f"marginality fails at {len(mg.violations)} prefixes")
        if state_independent:
            ci = check_choice_set_independence(p, max(tol, 1e-9))
            if not ci.holds:
                raise NotRepresentable(f"choice-set independence fails at {len(ci.violations)} places")
    n, exact = p.n, p.exact
    qs = _levels(p)
    rep = CdruRepresentation(p.alts, p.T, None, state_independent=state_independent)
    for L in range(p.T):
        for xs in itertools.product(range(n), repeat=L):
            common = None
            for As in itertools.product(range(1, 1 << n), repeat=L):
                if not all((A >> x) & 1 for x, A in zip(xs, As)):
                    continue
                g = _graph(qs[L + 1], xs, As, n)
                if L > 0 and _is_zero(g.outflow, exact, tol):
                    continue
                dist = decompose_graph(g, n, exact, tol)
                if L == 0:
                    rep.first = dist
                    continue
                rep.kernels[(xs, As)] = dist
                if state_independent:
                    if common is None:
                        common = dist
                    elif not _same(common, dist, exact):
                        raise NotRepresentable(f"consumption history {xs}: kernels depend on past menus")
            if state_independent and L > 0 and common is not None:
                rep.si_kernels[xs] = common
    return rep


def _same(a, b, exact, tol=1e-9):
    if exact:
        return all(u == v for u, v in zip(a, b))
    return np.allclose(np.asarray(a, float), np.asarray(b, float), atol=tol)


@dataclass
class VerificationReport:
    reproduces: bool
    identification: bool
    max_error: float

    @property
    def holds(self):
        return self.reproduces and self.identification


def identification_check(model, p, tol=1e-9):
    """Moebius inverse of ``p`` equals the I-set sums of the model."""
    p.require_full("identification check")
    model = _as_model(model)
    q_data = mobius(p.table, p.T)
    q_model = iset_mobius(model)
    return _tables_equal(q_data, q_model, p, tol)


def _tables_equal(a, b, p, tol):
    valid = valid_cells(p.n, p.T)
    if p.exact and is_exact(b):
        return all(a[i] == b[i] for i in zip(*np.nonzero(valid)))
    diff = np.abs(np.asarray(a, float) - np.asarray(b, float))[valid]
    return bool(diff.max(initial=0.0) <= tol)


def verify_representation(model, p, tol=1e-9):
    """Forward-simulate the model over ``N``-sets and compare with ``p`` on observed cells."""
    model = _as_model(model)
    gen = forward_rule_nsets(model)
    errs = []
    exact = p.exact and is_exact(gen.table)
    ok = True
    for xs, As, v in p.cells():
        w = gen.value(xs, As)
        if exact:
            ok &= (v == w)
            errs.append(abs(float(v - w)))
        else:
            errs.append(abs(float(v) - float(w)))
    max_err = max(errs, default=0.0)
    if not exact:
        ok = max_err <= tol
    ident = identification_check(model, p, tol) if p.full_domain else ok
    return VerificationReport(bool(ok), bool(ident), max_err)


def joint_from_ccp(first, ccp):
    """Two-period rule ``p(x, y, A, B) = p(x, A) * ccp(x, A)[y, B]``.

    ``first`` is a one-period rule; ``ccp(x, A)`` returns a one-period table.
    """
    n = first.n
    exact = first.exact
    tab = _zero_table(n, 2, exact)
    for A in first.alts.menus(1):
        for x in members(A):
            cond = np.asarray(ccp(x, A))
            tab[x, A] = first.table[x, A] * cond
    return ChoiceRule(first.alts, tab, 2)
