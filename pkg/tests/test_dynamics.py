from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdru.behaviors import example1_transition, example_transition, intro_transition
from cdru.dynamics import (
    ArrivalFunction,
    TransitionFunction,
    chain_structure,
    common_invariant,
    invariant_distribution_common,
    joint_chain,
    joint_stationary,
    limit_distribution,
    mean_passage,
    mean_passage_first_step,
    menu_chain,
    rho,
    stationary,
    stationary_power,
    time_average_rcr,
)
from cdru.errors import NotErgodic, ValidationError

from helpers import alts

HALF = F(1, 2)


def test_kernel_validation():
    a = alts(2)
    bad = np.full((2, 2, 2), 0.45)
    with pytest.raises(ValidationError):
        TransitionFunction(a, bad)
    neg = np.array([[[1.5, -0.5], [0.5, 0.5]]] * 2)
    with pytest.raises(ValidationError):
        TransitionFunction(a, neg)
    with pytest.raises(ValidationError):
        TransitionFunction(a, np.full((2, 3, 3), 1 / 3))


def test_example1_menu_chains_are_constant():
    t = example1_transition()
    for A in t.alts.menus(2):
        M = menu_chain(t, A)
        assert M[np.ix_([0, 5], [0, 5])].tolist() == [[F(2, 3), F(1, 3)], [F(1, 3), F(2, 3)]]
        nu = stationary(M)
        assert nu[0] == HALF and nu[5] == HALF and sum(nu) == 1


def test_intro_stationaries():
    t = intro_transition()
    a = t.alts
    ab, bc = a.mask("ab"), a.mask("bc")
    nu = stationary(menu_chain(t, ab))
    assert nu[a.order_index("a>c>b")] == HALF and nu[a.order_index("b>c>a")] == HALF
    st_ab = chain_structure(menu_chain(t, ab))
    assert st_ab.periods == [2]
    with pytest.raises(NotErgodic):
        stationary(menu_chain(t, ab), strict=True)
    nu = stationary(menu_chain(t, bc))
    assert nu[a.order_index("a>c>b")] == 1


def test_stationary_matches_power_iteration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.dirichlet(np.ones(6), size=6)
        assert np.allclose(stationary(M), stationary_power(M), atol=1e-12)


def test_not_unichain_raises():
    with pytest.raises(NotErgodic):
        stationary(np.eye(3))


def test_limit_distribution_with_two_classes():
    M = np.array([[F(1), 0, 0], [0, F(1), 0], [HALF, F(1, 4), F(1, 4)]], dtype=object)
    out = limit_distribution(M, [0, 0, 1])
    assert list(out) == [F(2, 3), F(1, 3), 0]


def test_mean_passage_two_routes_agree():
    rng = np.random.default_rng(1)
    for _ in range(10):
        M = rng.dirichlet(np.ones(5), size=5)
        assert np.allclose(mean_passage(M), mean_passage_first_step(M), atol=1e-9)
        nu = stationary(M)
        assert np.allclose(np.diag(mean_passage(M)), 1 / nu)


def test_mean_passage_exact_two_state():
    # two-state chain a -> b w.p. p: n(a, b) = 1/p
    M = np.array([[F(3, 4), F(1, 4)], [F(1, 2), F(1, 2)]], dtype=object)
    N = mean_passage(M)
    assert N[0, 1] == 4 and N[1, 0] == 2
    assert N[0, 0] == 1 / stationary(M)[0]


def test_mean_passage_periodic_uses_first_step():
    M = np.array([[0, F(1)], [F(1), 0]], dtype=object)
    N = mean_passage(M)
    assert N.tolist() == [[2, 1], [1, 2]]


def test_time_average_rcr_example1():
    p = time_average_rcr(example1_transition())
    assert p.table[0, 7] == HALF and p.table[2, 7] == HALF and p.table[1, 7] == 0
    assert p.table[1, 3] == HALF  # y beats x under z>y>x


def test_common_invariant_example1_and_intro():
    nu = invariant_distribution_common(example1_transition())
    assert nu[0] == HALF and nu[5] == HALF
    assert invariant_distribution_common(intro_transition()) is None


def test_common_invariant_maximises_min_weight():
    # two blocks leaving a two-dimensional invariant face: the best minimum weight is 1/2
    eye = np.eye(2, dtype=int)
    blocks = [np.array([[F(1), 0], [0, F(1)]], dtype=object) - eye]
    nu, eta = common_invariant(blocks, 2)
    assert eta == HALF and list(nu) == [HALF, HALF]


def test_joint_chain_is_product_for_iid():
    a = alts(3)
    K = np.array([[F(1, 6)] * 6] * 6, dtype=object)
    t = TransitionFunction.consumption_independent(a, K)
    s = ArrivalFunction(a, np.array([[F(1, 4)] * 4] * 4, dtype=object))
    P = joint_chain(t, s)
    assert P.shape == (24, 24) and all(sum(r) == 1 for r in P)
    psi = joint_stationary(t, s)
    assert np.all(psi == F(1, 24))
    R = rho(s)
    assert np.all(R == F(1, 4))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_to_exact_keeps_rows_stochastic(seed):
    t = example_transition("full_support", alts(3), seed=seed)
    q = t.to_exact(10**6)
    assert q.exact
    assert all(sum(q.kernel[x, k]) == 1 for x in range(3) for k in range(6))
    assert np.allclose(np.asarray(q.kernel, float), t.kernel, atol=1e-5)
