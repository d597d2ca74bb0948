import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdru.behaviors import (
    EXAMPLE_CLASSES,
    CravingSpec,
    HabitLogitSpec,
    craving_order,
    cravings_closed_form,
    cravings_rcr,
    cravings_regularity_report,
    cravings_transition,
    example_transition,
    habit_logit_bias,
    habit_logit_ccp,
    habit_logit_chain,
    habit_logit_rcr,
    habit_logit_stationary,
    habit_logit_vhat,
    iia_report,
    random_cravings,
    random_habit_logit,
)
from cdru.dynamics import limit_distribution, menu_chain, stationary, stationary_power
from cdru.errors import ValidationError
from cdru.invariance import is_locally_invariant, no_investment_test

from helpers import alts

LN3 = math.log(3)


def base_spec(phi_ac=F(1, 2)):
    a = alts(3)
    w = np.array([F(1, 2), F(3, 10), F(1, 5)], dtype=object)
    phi = np.array([[0, F(3, 10), phi_ac], [F(2, 5), 0, F(3, 5)], [F(1, 5), F(1, 4), 0]], dtype=object)
    return CravingSpec(a, (0, 1, 2), w, phi)


# --- cravings ----------------------------------------------------------------

def test_craving_kernel_entries():
    spec = base_spec()
    t = cravings_transition(spec)
    sp = spec.alts.space
    kc = sp.index[craving_order((0, 1, 2), 2)]
    assert t.kernel[0, kc, kc] == F(3, 5)  # 0.5 + 0.5 * 0.2
    nu = spec.nu()
    for x in range(3):
        kx = sp.index[craving_order((0, 1, 2), x)]
        assert list(t.kernel[x, kx]) == list(nu)  # sated craving
    off = sp.index[(1, 2, 0)]  # b>c>a is no craving order
    for x in range(3):
        assert list(t.kernel[x, off]) == list(nu)


def test_closed_form_removal_value():
    spec = base_spec()
    assert cravings_closed_form(spec, 2) == F(1, 3)
    # independent oracle: power iteration on the {a, b} chain
    M = np.asarray(menu_chain(cravings_transition(spec), 3), dtype=float)
    nu = stationary_power(M)
    assert nu[spec.craving_index(2)] == pytest.approx(1 / 3, abs=1e-12)


def test_regularity_fails_for_base_spec():
    assert cravings_regularity_report(base_spec())


def test_regularity_gap_grows_with_persistence():
    # removing c leaves a on top of the base order; b loses share to the lingering c craving
    hi, lo = cravings_rcr(base_spec(F(1, 2))), cravings_rcr(base_spec(F(1, 4)))
    y, rest, full = 1, 3, 7
    assert hi.table[y, rest] == F(1, 4)  # 0.3 * (1 - 1/3 * 1/2)
    assert lo.table[y, rest] == F(9, 32)  # 0.3 * (1 - 1/4 * 1/4)
    assert hi.table[y, full] - hi.table[y, rest] > lo.table[y, full] - lo.table[y, rest]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 4]), st.data())
def test_regularity_gap_monotone_in_persistence(seed, n, data):
    spec = random_cravings(alts(n), seed=seed)
    x = data.draw(st.integers(0, n - 1))
    rest = ((1 << n) - 1) & ~(1 << x)
    top = next(z for z in spec.base if z != x)
    ys = [y for y in range(n) if y not in (x, top)]
    phi = spec.persistence.copy()
    old = phi[top, x]
    phi[top, x] = old / 2 if data.draw(st.booleans()) else (old + 1) / 2
    other = CravingSpec(spec.alts, spec.base, spec.weights, phi)
    p, q = cravings_rcr(spec).table, cravings_rcr(other).table
    full = (1 << n) - 1
    for y in ys:
        gap_p = p[y, full] - p[y, rest]
        gap_q = q[y, full] - q[y, rest]
        assert (gap_p > gap_q) == (spec.persistence[top, x] > phi[top, x])


def test_craving_validation():
    a = alts(3)
    phi = np.array([[0, 0.2, 0.2], [0.2, 0, 0.2], [0.2, 0.2, 0]])
    with pytest.raises(ValidationError):
        CravingSpec(a, (0, 1, 2), np.array([0.3, 0.5, 0.2]), phi)  # not decreasing
    with pytest.raises(ValidationError):
        CravingSpec(a, (0, 1, 2), np.array([0.6, 0.4, 0.0]), phi)  # zero weight
    bad = phi.copy()
    bad[0, 0] = 0.1
    with pytest.raises(ValidationError):
        CravingSpec(a, (0, 1, 2), np.array([0.5, 0.3, 0.2]), bad)
    bad = phi.copy()
    bad[0, 1] = 1.0
    with pytest.raises(ValidationError):
        CravingSpec(a, (0, 1, 2), np.array([0.5, 0.3, 0.2]), bad)
    with pytest.raises(ValidationError):
        cravings_regularity_report(random_cravings(alts(2), seed=0))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 4]))
def test_closed_form_on_random_specs(seed, n):
    spec = random_cravings(alts(n), seed=seed)
    for x in range(n):
        cravings_closed_form(spec, x, check=True, tol=1e-10)


# --- habit logit -------------------------------------------------------------

def logit(v, c, labels=("x", "o")):
    a = alts(2) if labels is None else __import__("cdru").AlternativeSet(labels)
    return HabitLogitSpec(a, 1, np.array([v, 0.0]), np.array([c, 0.0]))


def test_symmetric_logit():
    p = habit_logit_stationary(logit(0.0, 0.0), 3)
    assert p == pytest.approx([0.5, 0.5])


def test_habit_ratio_two():
    spec = logit(0.0, LN3)
    p = habit_logit_stationary(spec, 3)
    assert p[0] / p[1] == pytest.approx(2.0, abs=1e-12)
    oracle = stationary_power(habit_logit_chain(spec, 3))
    assert oracle == pytest.approx(p, abs=1e-12)
    assert habit_logit_vhat(spec, 0) == pytest.approx(math.log(2), abs=1e-12)
    assert habit_logit_bias(spec, 0) == pytest.approx(math.log(2), abs=1e-12)


def test_negative_value_estimated_positive():
    spec = logit(-0.1, 3.0)
    assert habit_logit_vhat(spec, 0) > 0


def test_no_habit_reduces_to_logit():
    a = alts(4)
    v = np.array([0.3, -0.2, 1.1, 0.0])
    spec = HabitLogitSpec(a, 3, v, np.zeros(4))
    for A in spec.menus():
        xs = [x for x in range(4) if (A >> x) & 1]
        e = np.exp(v[xs])
        assert habit_logit_stationary(spec, A) == pytest.approx(e / e.sum(), abs=1e-12)
        assert habit_logit_ccp(spec, A, xs[0]) == pytest.approx(e / e.sum(), abs=1e-12)
    assert not iia_report(habit_logit_rcr(spec))


def test_habit_validation():
    a = alts(3)
    with pytest.raises(ValidationError):
        HabitLogitSpec(a, 2, np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValidationError):
        HabitLogitSpec(a, 2, np.zeros(3), np.array([-1.0, 0.0, 0.0]))
    HabitLogitSpec(a, 2, np.zeros(3), np.array([-1.0, 0.0, 0.0]), allow_negative_habit=True)
    with pytest.raises(ValidationError):
        habit_logit_ccp(HabitLogitSpec(a, 2, np.zeros(3), np.zeros(3)), 3, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 4]))
def test_iia_iff_no_habit(seed, n):
    spec = random_habit_logit(alts(n), seed=seed)
    violations = iia_report(habit_logit_rcr(spec), tol=1e-9)
    assert (not violations) == bool(np.all(spec.c == 0))


# --- generated kernel classes ------------------------------------------------

def _support(t, x, k):
    return [j for j, v in enumerate(t.kernel[x, k]) if v != 0]


def _pairs(order):
    return {(a, b) for i, a in enumerate(order) for b in order[i + 1:]}


@pytest.mark.parametrize("kind,direction", [("habit", "up"), ("variety", "down"), ("learning", "any")])
def test_shift_kernels_respect_their_supports(kind, direction):
    t = example_transition(kind, alts(3), seed=2, exact=True)
    sp = t.alts.space
    for x in range(3):
        for k, order in enumerate(sp.orders):
            for j in _support(t, x, k):
                new = sp.orders[j]
                rest = [y for y in order if y != x]
                assert [y for y in new if y != x] == rest  # other comparisons preserved
                if direction == "up":
                    assert new.index(x) <= order.index(x)
                if direction == "down":
                    assert new.index(x) >= order.index(x)


def test_complements_and_substitutes_move_the_partner():
    for kind, up in (("complements", True), ("substitutes", False)):
        t = example_transition(kind, alts(3), seed=1, exact=True, pair=(0, 1))
        sp = t.alts.space
        for k, order in enumerate(sp.orders):
            for x in (1, 2):
                assert _support(t, x, k) == [k]
            for j in _support(t, 0, k):
                d = sp.orders[j].index(1) - order.index(1)
                assert (d <= 0) if up else (d >= 0)


def test_status_quo_favours_the_consumed_item():
    t = example_transition("status_quo", alts(3), seed=5, exact=True)
    sp = t.alts.space

    def prob(row, x, y):
        return sum(w for j, w in enumerate(row) if sp.ranks[j][x] < sp.ranks[j][y])

    for x in range(3):
        for y in range(3):
            for z in range(3):
                if len({x, y, z}) == 3:
                    assert prob(t.kernel[x, 0], x, y) >= prob(t.kernel[z, 0], x, y)


@pytest.mark.parametrize("kind", ["habit", "variety", "complements", "learning"])
def test_strict_effects_break_local_invariance(kind):
    t = example_transition(kind, alts(3), seed=11, exact=True)
    uniform = np.array([F(1, 6)] * 6, dtype=object)
    assert not is_locally_invariant(t, uniform)
    start = limit_distribution(menu_chain(t, 7), uniform)
    if all(v > 0 for v in start):
        assert not is_locally_invariant(t, start)


@pytest.mark.parametrize("kind", ["habit", "variety", "learning"])
def test_strict_effects_admit_investment(kind):
    t = example_transition(kind, alts(3), seed=11, exact=True)
    assert no_investment_test(t).kind == "plan"


def test_every_class_builds():
    for kind in EXAMPLE_CLASSES:
        t = example_transition(kind, seed=0)
        assert t.kernel.shape[0] == t.alts.n
    with pytest.raises(ValidationError):
        example_transition("nonsense")
