"""Behavioural models with closed forms and generators for example kernel classes.

* Persistent cravings: the agent craves one alternative at a time, ranks it
  first and otherwise follows a base order; consuming something else lets
  the craving persist with a given probability.
* Habit-formation logit: logit choice with a utility boost for whatever was
  consumed last period, plus an outside option present in every menu.
* Generators for learning, habit, variety, status-quo, complements and
  substitutes kernels, the two fixed textbook kernels, and random
  (in)variant kernels for fuzzing.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._exact import fraction_array, is_exact, nullspace, to_fraction, Q
from .dynamics import TransitionFunction, menu_chain, stationary, time_average_rcr
from .errors import DegenerateDenominator, ValidationError
from .jointchoice import ChoiceRule
from .lattice import AlternativeSet, members, order_space

__all__ = [
    "CravingSpec",
    "craving_order",
    "cravings_transition",
    "cravings_rcr",
    "cravings_closed_form",
    "cravings_regularity_report",
    "regularity_violations",
    "random_cravings",
    "HabitLogitSpec",
    "habit_logit_ccp",
    "habit_logit_chain",
    "habit_logit_stationary",
    "habit_logit_rcr",
    "habit_logit_vhat",
    "habit_logit_bias",
    "iia_report",
    "random_habit_logit",
    "example1_transition",
    "intro_transition",
    "example_transition",
    "EXAMPLE_CLASSES",
]


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# --- persistent cravings -----------------------------------------------------

def craving_order(base, x):
    """``x`` first, the rest as in ``base``."""
    return (x,) + tuple(y for y in base if y != x)


@dataclass(frozen=True)
class CravingSpec:
    """Persistent-craving model.

    Attributes
    ----------
    alts : AlternativeSet
    base : tuple of int
        Base order, best first.
    weights : ndarray, shape (n,)
        ``weights[x]`` is the probability of craving ``x``.
    persistence : ndarray, shape (n, n)
        ``persistence[x, y]``: chance a craving for ``y`` survives consuming ``x``.
    """

    alts: AlternativeSet
    base: tuple
    weights: np.ndarray
    persistence: np.ndarray

    def __post_init__(self):
        n = self.alts.n
        base = tuple(int(v) for v in self.base)
        object.__setattr__(self, "base", base)
        if sorted(base) != list(range(n)):
            raise ValidationError("base must be a permutation of the alternatives")
        w = np.asarray(self.weights)
        phi = np.asarray(self.persistence)
        if w.shape != (n,) or phi.shape != (n, n):
            raise ValidationError("weights must have shape (n,) and persistence (n, n)")
        exact = w.dtype == object
        total = sum(w) if exact else w.sum()
        if (exact and total != 1) or (not exact and abs(total - 1) > 1e-12):
            raise ValidationError(f"craving weights sum to {total}, not 1")
        seq = [w[x] for x in base]
        if any(v <= 0 for v in seq):
            raise ValidationError("craving weights must be strictly positive")
        if any(a <= b for a, b in zip(seq, seq[1:])):
            raise ValidationError("craving weights must strictly decrease along the base order")
        for x in range(n):
            for y in range(n):
                v = phi[x, y]
                if x == y and v != 0:
                    raise ValidationError("a sated craving cannot persist: persistence[x, x] must be 0")
                if x != y and not 0 < v < 1:
                    raise ValidationError("persistence[x, y] must lie in (0, 1) for x != y")

    @property
    def exact(self):
        return np.asarray(self.weights).dtype == object

    def craving_index(self, x):
        return self.alts.space.index[craving_order(self.base, x)]

    def nu(self):
        """Craving distribution over all orders (zero off the craving orders)."""
        m = self.alts.space.m
        out = np.zeros(m, dtype=object if self.exact else float)
        if self.exact:
            out[:] = Fraction(0)
        for x in range(self.alts.n):
            out[self.craving_index(x)] = self.weights[x]
        return out


def cravings_transition(spec):
    """``t(x, craving y) = phi(x, y) delta + (1 - phi(x, y)) nu``; other orders go to ``nu``."""
    n = spec.alts.n
    m = spec.alts.space.m
    nu = spec.nu()
    K = np.empty((n, m, m), dtype=nu.dtype)
    K[:, :, :] = nu
    for y in range(n):
        k = spec.craving_index(y)
        for x in range(n):
            phi = spec.persistence[x, y]
            row = (1 - phi) * nu
            row[k] = row[k] + phi
            K[x, k] = row
    return TransitionFunction(spec.alts, K)


def cravings_rcr(spec):
    return time_average_rcr(cravings_transition(spec))


def cravings_closed_form(spec, x, check=True, tol=1e-10):
    """Stationary weight of craving ``x`` once ``x`` is removed from ``X``.

    Equals ``nu_x / (1 - phi(m, x) (1 - nu_x))`` where ``m`` is the base-order
    best of ``X - {x}``. With ``check`` the value is compared with the
    stationary distribution of the chain at ``X - {x}``.
    """
    full = spec.alts.full
    rest = full & ~(1 << x)
    top = next(y for y in spec.base if y != x)
    w = spec.weights[x]
    denom = 1 - spec.persistence[top, x] * (1 - w)
    if denom == 0:
        raise DegenerateDenominator("persistence equal to one")
    value = w / denom
    if check:
        nu = stationary(menu_chain(cravings_transition(spec), rest))
        direct = nu[spec.craving_index(x)]
        if (value != direct) if spec.exact else abs(value - direct) > tol:
            raise AssertionError(f"closed form {value} disagrees with stationary {direct}")
    return value


def regularity_violations(p, tol=1e-12):
    """All ``(y, A, B)`` with ``y`` in ``A``, ``A`` a proper subset of ``B`` and ``p(y, A) < p(y, B)``."""
    out = []
    obs = {At[0] for At in p.observed}
    for A in sorted(obs):
        for B in sorted(obs):
            if A == B or A & B != A:
                continue
            for y in members(A):
                a, b = p.table[y, A], p.table[y, B]
                if (a < b) if p.exact else (a < b - tol):
                    out.append((y, A, B))
    return out


def cravings_regularity_report(spec, tol=1e-12):
    if spec.alts.n < 3:
        raise ValidationError("regularity failures need at least three alternatives")
    return regularity_violations(cravings_rcr(spec), tol)


def random_cravings(alts, seed=None, exact=False, denominator=20):
    """Random valid craving spec (base order shuffled)."""
    rng = _rng(seed)
    n = alts.n
    base = tuple(int(v) for v in rng.permutation(n))
    if exact:
        while True:
            raw = sorted(rng.choice(np.arange(1, 4 * denominator), size=n, replace=False), reverse=True)
            total = sum(int(v) for v in raw)
            seq = [Fraction(int(v), total) for v in raw]
            if all(a > b for a, b in zip(seq, seq[1:])):
                break
        phi = np.empty((n, n), dtype=object)
        for x in range(n):
            for y in range(n):
                phi[x, y] = Fraction(0) if x == y else Fraction(int(rng.integers(1, denominator)), denominator)
        w = np.empty(n, dtype=object)
    else:
        while True:
            seq = np.sort(rng.dirichlet(np.ones(n)))[::-1]
            if np.all(np.diff(seq) < -1e-3):
                break
        phi = rng.uniform(0.05, 0.95, size=(n, n))
        np.fill_diagonal(phi, 0.0)
        w = np.empty(n)
    for rank, x in enumerate(base):
        w[x] = seq[rank]
    return CravingSpec(alts, base, w, phi)


# --- habit-formation logit ---------------------------------------------------

@dataclass(frozen=True)
class HabitLogitSpec:
    """Logit with a habit boost ``c`` for last period's choice and an outside option."""

    alts: AlternativeSet
    outside: int
    v: np.ndarray
    c: np.ndarray
    allow_negative_habit: bool = False

    def __post_init__(self):
        n = self.alts.n
        v = np.asarray(self.v, dtype=float)
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "c", c)
        if not 0 <= self.outside < n:
            raise ValidationError("outside option index out of range")
        if v.shape != (n,) or c.shape != (n,):
            raise ValidationError("v and c must have one entry per alternative")
        if v[self.outside] != 0 or c[self.outside] != 0:
            raise ValidationError("the outside option has v = c = 0")
        if not self.allow_negative_habit and (c < 0).any():
            raise ValidationError("habit boosts must be nonnegative (set allow_negative_habit to relax)")

    def menus(self):
        """Menus containing the outside option and at least one other alternative."""
        o = 1 << self.outside
        return [A for A in self.alts.menus(2) if A & o]


def _require_outside(spec, menu):
    if not (menu >> spec.outside) & 1:
        raise ValidationError("the outside option must belong to every menu")


def habit_logit_ccp(spec, menu, y):
    """Choice probabilities on ``members(menu)`` given last period's choice ``y``."""
    _require_outside(spec, menu)
    xs = members(menu)
    u = np.array([spec.v[x] + (spec.c[x] if x == y else 0.0) for x in xs])
    e = np.exp(u - u.max())
    return e / e.sum()


def habit_logit_chain(spec, menu):
    """Transition matrix over ``members(menu)``: row = last choice, column = current choice."""
    xs = members(menu)
    return np.array([habit_logit_ccp(spec, menu, y) for y in xs])


def habit_logit_stationary(spec, menu):
    """Closed form ``p(x) prop. to e^{v(x)} sum_{y in A} e^{v(y) + c(y) 1{x = y}}``."""
    _require_outside(spec, menu)
    xs = members(menu)
    ev = np.exp(spec.v[list(xs)])
    base = ev.sum()
    w = np.array([ev[i] * (base - ev[i] + math.exp(spec.v[x] + spec.c[x])) for i, x in enumerate(xs)])
    return w / w.sum()


def habit_logit_rcr(spec):
    """Stationary choice probabilities on menus containing the outside option."""
    n = spec.alts.n
    table = np.zeros((n, 1 << n))
    obs = []
    o = spec.outside
    table[o, 1 << o] = 1.0
    obs.append((1 << o,))
    for A in spec.menus():
        table[list(members(A)), A] = habit_logit_stationary(spec, A)
        obs.append((A,))
    return ChoiceRule(spec.alts, table, T=1, observed=obs)


def habit_logit_vhat(spec, x):
    """Plain logit estimate ``log(p(x, {x, o}) / p(o, {x, o}))`` from stationary data."""
    A = (1 << x) | (1 << spec.outside)
    p = habit_logit_stationary(spec, A)
    xs = members(A)
    px, po = p[xs.index(x)], p[xs.index(spec.outside)]
    if po == 0:
        raise DegenerateDenominator("outside option never chosen")
    return math.log(px / po)


def habit_logit_bias(spec, x):
    return math.log1p(math.exp(spec.v[x] + spec.c[x])) - math.log1p(math.exp(spec.v[x]))


def iia_report(p, tol=1e-9):
    """Quadruples ``(x, y, A, B)`` where ``p(x,A)/p(y,A) != p(x,B)/p(y,B)``.

    Ratios are compared in cross-multiplied form, so zero denominators are fine.
    """
    out = []
    menus_ = sorted({At[0] for At in p.observed})
    for i, A in enumerate(menus_):
        for B in menus_[i + 1:]:
            common = members(A & B)
            for a, x in enumerate(common):
                for y in common[a + 1:]:
                    lhs = p.table[x, A] * p.table[y, B]
                    rhs = p.table[x, B] * p.table[y, A]
                    if (lhs != rhs) if p.exact else abs(lhs - rhs) > tol:
                        out.append((x, y, A, B))
    return out


def random_habit_logit(alts, seed=None, outside=None, habit_prob=0.5, c_range=(0.1, 3.0)):
    """Random spec; each non-outside alternative gets a habit boost with probability ``habit_prob``."""
    rng = _rng(seed)
    n = alts.n
    o = n - 1 if outside is None else outside
    v = rng.normal(0.0, 1.0, n)
    c = np.where(rng.random(n) < habit_prob, rng.uniform(*c_range, n), 0.0)
    v[o] = 0.0
    c[o] = 0.0
    return HabitLogitSpec(alts, o, v, c)


# --- fixed textbook kernels --------------------------------------------------

def example1_transition(labels=("x", "y", "z")):
    """Two supported orders ``x>y>z`` and ``z>y>x``; consumption of ``y`` acts like the top choice.

    Orders outside the support follow the row of whichever of ``x`` and
    ``z`` they rank higher, so they are transient in every menu chain.
    """
    alts = AlternativeSet(labels)
    space = alts.space
    kx = space.index[(0, 1, 2)]
    kz = space.index[(2, 1, 0)]
    m = space.m
    row_x = np.array([Fraction(0)] * m, dtype=object)
    row_z = row_x.copy()
    row_x[kx], row_x[kz] = Fraction(2, 3), Fraction(1, 3)
    row_z[kx], row_z[kz] = Fraction(1, 3), Fraction(2, 3)

    def fn(c, k):
        if c == 0:
            return row_x
        if c == 2:
            return row_z
        ranks = space.ranks[k]
        return row_x if ranks[0] < ranks[2] else row_z

    return TransitionFunction.from_callable(alts, fn, exact=True)


def intro_transition(labels=("a", "b", "c")):
    """Deterministic kernel: choosing ``a`` leads to ``b>c>a``, choosing ``b`` or ``c`` to ``a>c>b``."""
    alts = AlternativeSet(labels)
    space = alts.space
    m = space.m
    to_bca = np.array([Fraction(0)] * m, dtype=object)
    to_acb = to_bca.copy()
    to_bca[space.index[(1, 2, 0)]] = Fraction(1)
    to_acb[space.index[(0, 2, 1)]] = Fraction(1)
    return TransitionFunction.from_callable(alts, lambda c, k: to_bca if c == 0 else to_acb, exact=True)


# --- random kernels ----------------------------------------------------------

def _weights(rng, size, exact, scale=9):
    if size == 0:
        return []
    if exact:
        raw = [int(v) for v in rng.integers(1, scale + 1, size)]
        total = sum(raw)
        return [Fraction(r, total) for r in raw]
    return list(rng.dirichlet(np.ones(size)))


def _row(m, support, rng, exact):
    row = np.array([Fraction(0)] * m, dtype=object) if exact else np.zeros(m)
    for k, w in zip(support, _weights(rng, len(support), exact)):
        row[k] = w
    return row


def _split_row(m, strict, weak, strength, rng, exact):
    """``strength`` mass on ``strict`` orders and the rest on ``weak`` ones."""
    if not strict:
        return _row(m, weak, rng, exact)
    if not weak:
        return _row(m, strict, rng, exact)
    s = to_fraction(strength) if exact else float(strength)
    return s * _row(m, strict, rng, exact) + (1 - s) * _row(m, weak, rng, exact)


def _move(order, x, pos):
    rest = [y for y in order if y != x]
    rest.insert(pos, x)
    return tuple(rest)


def _positions(order, x, direction):
    cur = order.index(x)
    n = len(order)
    if direction == "any":
        return range(n)
    if direction == "up":
        return range(cur + 1)
    return range(cur, n)


def _shift_kernel(alts, rng, strength, exact, direction, mover=None, trigger=None):
    """Kernel moving one alternative (the consumed one, or ``mover`` after ``trigger``)."""
    space = alts.space
    m = space.m

    def fn(x, k):
        order = space.orders[k]
        if trigger is not None and x != trigger:
            return _row(m, [k], rng, exact)
        target = x if mover is None else mover
        reach = sorted({space.index[_move(order, target, p)] for p in _positions(order, target, direction)})
        strict = [j for j in reach if j != k]
        return _split_row(m, strict, [k], strength, rng, exact)

    return TransitionFunction.from_callable(alts, fn, exact=exact)


def _top_push(space, dist, x):
    out = np.zeros_like(dist)
    if dist.dtype == object:
        out[:] = Fraction(0)
    for k, w in enumerate(dist):
        if w != 0:
            out[space.index[_move(space.orders[k], x, 0)]] += w
    return out


def _status_quo(alts, rng, strength, exact):
    space = alts.space
    m = space.m
    mu = _row(m, range(m), rng, exact)
    s = to_fraction(strength) if exact else float(strength)
    rows = np.array([(1 - s) * mu + s * _top_push(space, mu, x) for x in range(alts.n)])
    return TransitionFunction.state_independent(alts, rows)


def _as_if_top(alts, rng, exact):
    """Menu-invariant kernel: consumption matters only through the bottom alternative.

    ``t(x, k) = K(k)`` unless ``x`` is the worst alternative of order ``k``,
    which is never chosen from a menu with two or more alternatives.
    """
    space = alts.space
    m = space.m
    K = [_row(m, range(m), rng, exact) for _ in range(m)]
    odd = {(x, k): _row(m, range(m), rng, exact) for k in range(m) for x in [space.orders[k][-1]]}
    return TransitionFunction.from_callable(alts, lambda x, k: odd.get((x, k), K[k]), exact=exact)


def _projected_invariant(alts, rng):
    """Exact menu-invariant kernel with genuine consumption dependence on chosen alternatives.

    Starts from the i.i.d. kernel ``t = nu`` and adds a direction ``D`` with
    zero row sums and ``sum_k nu_k D(M(k, A), k) = 0`` for every menu ``A``.
    """
    space = alts.space
    n, m = alts.n, space.m
    nu = _row(m, range(m), rng, True)
    pairs = [(x, k) for k in range(m) for x in space.orders[k][:-1]]
    pid = {p: i for i, p in enumerate(pairs)}
    nvar = len(pairs) * m
    rows = []
    for i in range(len(pairs)):
        r = [0] * nvar
        for j in range(m):
            r[i * m + j] = 1
        rows.append(r)
    for A in alts.menus(2):
        for j in range(m):
            r = [Fraction(0)] * nvar
            for k in range(m):
                r[pid[(int(space.best[k, A]), k)] * m + j] += nu[k]
            rows.append(r)
    basis = nullspace(rows, nvar)
    coef = rng.integers(-3, 4, size=len(basis))
    D = [sum((int(c) * b[v] for c, b in zip(coef, basis) if c), Q(0)) for v in range(nvar)]
    peak = max((abs(to_fraction(d)) for d in D), default=Fraction(0))
    floor = min(nu)
    scale = Fraction(1) if peak == 0 else floor / (2 * peak)
    def fn(x, k):
        row = np.array(list(nu), dtype=object)
        if (x, k) in pid:
            i = pid[(x, k)]
            row = row + np.array([scale * to_fraction(D[i * m + j]) for j in range(m)], dtype=object)
        return row

    return TransitionFunction.from_callable(alts, fn, exact=True)


EXAMPLE_CLASSES = (
    "example1", "intro", "learning", "habit", "variety", "status_quo", "complements",
    "substitutes", "consumption_independent", "state_independent", "full_support",
    "invariant", "invariant_projected",
)


def example_transition(kind, alts=None, seed=None, strength=0.9, exact=False, pair=(0, 1)):
    """Random kernel of a named class (or one of the two fixed kernels).

    Parameters
    ----------
    kind : str
        One of :data:`EXAMPLE_CLASSES`.
    alts : AlternativeSet, optional
        Defaults to three alternatives ``a, b, c``.
    strength : float
        Mass placed on the orders that realise the class's effect (default 0.9).
    pair : tuple
        ``(x, y)`` for complements/substitutes: consuming ``x`` moves ``y``.
    """
    if kind == "example1":
        return example1_transition()
    if kind == "intro":
        return intro_transition()
    alts = alts or AlternativeSet(("a", "b", "c"))
    rng = _rng(seed)
    m = alts.space.m
    if kind == "learning":
        return _shift_kernel(alts, rng, strength, exact, "any")
    if kind == "habit":
        return _shift_kernel(alts, rng, strength, exact, "up")
    if kind == "variety":
        return _shift_kernel(alts, rng, strength, exact, "down")
    if kind == "complements":
        return _shift_kernel(alts, rng, strength, exact, "up", mover=pair[1], trigger=pair[0])
    if kind == "substitutes":
        return _shift_kernel(alts, rng, strength, exact, "down", mover=pair[1], trigger=pair[0])
    if kind == "status_quo":
        return _status_quo(alts, rng, strength, exact)
    if kind == "consumption_independent":
        K = np.array([_row(m, range(m), rng, exact) for _ in range(m)])
        return TransitionFunction.consumption_independent(alts, K)
    if kind == "state_independent":
        rows = np.array([_row(m, range(m), rng, exact) for _ in range(alts.n)])
        return TransitionFunction.state_independent(alts, rows)
    if kind == "full_support":
        return TransitionFunction.from_callable(alts, lambda x, k: _row(m, range(m), rng, exact), exact=exact)
    if kind == "invariant":
        return _as_if_top(alts, rng, exact)
    if kind == "invariant_projected":
        return _projected_invariant(alts, rng)
    raise ValidationError(f"unknown example class {kind!r}; choose from {EXAMPLE_CLASSES}")
