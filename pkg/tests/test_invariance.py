from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdru.behaviors import (
    CravingSpec,
    cravings_transition,
    example1_transition,
    example_transition,
    intro_transition,
    random_cravings,
)
from cdru.dynamics import (
    ArrivalFunction,
    TransitionFunction,
    mean_passage,
    menu_chain,
    stationary,
)
from cdru.errors import DegenerateDenominator, InternalBreach, RankDeficient, ValidationError
from cdru.invariance import (
    investment_matrix,
    is_jointly_menu_invariant,
    is_locally_invariant,
    is_menu_invariant_direct,
    joint_no_investment_test,
    local_residual,
    local_residuals,
    no_investment_test,
    recover_gap,
    residual_gap_relation,
    passage_time_prediction,
    removal_prediction,
    equivalence_check,
)
from cdru.lattice import order_space

from helpers import alts, rand_dist


def dirichlet(rng, m):
    return rng.dirichlet(np.ones(m))


def cravings():
    a = alts(3)
    w = np.array([F(1, 2), F(3, 10), F(1, 5)], dtype=object)
    phi = np.array([[0, F(3, 10), F(1, 2)], [F(2, 5), 0, F(3, 5)], [F(1, 5), F(1, 4), 0]], dtype=object)
    return CravingSpec(a, (0, 1, 2), w, phi)


def arrival(a, stay):
    k = len(a.menus(2))
    S = np.full((k, k), (1 - stay) / (k - 1), dtype=object)
    for i in range(k):
        S[i, i] = stay
    return ArrivalFunction(a, S)


# --- direct test -------------------------------------------------------------

def test_example1_is_invariant_without_full_support():
    t = example1_transition()
    out = is_menu_invariant_direct(t)
    assert out.holds and not out.full_support
    for A in t.alts.menus(2):
        M = menu_chain(t, A)
        assert list(out.nu @ M) == list(out.nu)


def test_intro_kernel_is_not_invariant():
    out = is_menu_invariant_direct(intro_transition())
    assert not out.holds


def test_cravings_witness():
    t = cravings_transition(cravings())
    out = is_menu_invariant_direct(t)
    assert not out.holds and out.witness == (7, 3)


def test_consumption_independent_is_invariant():
    t = example_transition("consumption_independent", alts(3), seed=3, exact=True)
    out = is_menu_invariant_direct(t)
    assert out.holds and out.full_support


# --- local residuals ---------------------------------------------------------

def test_cravings_residual_values():
    spec = cravings()
    t = cravings_transition(spec)
    r = local_residual(t, spec.nu(), 7, 2)
    assert list(r.eps) == [F(1, 20), 0, F(3, 100), 0, F(-2, 25), 0]
    assert r.total() == 0 and not r.is_zero()
    # matrix form with the full-menu and reduced-menu chains
    D = menu_chain(t, 7) - menu_chain(t, 3)
    assert list(spec.nu() @ D) == list(r.eps)


def test_residual_validation():
    t = intro_transition()
    nu = np.full(6, F(1, 6), dtype=object)
    with pytest.raises(ValidationError):
        local_residual(t, nu, 3, 0)
    with pytest.raises(ValidationError):
        local_residual(t, nu, 6, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([3, 4]))
def test_residuals_sum_to_zero(seed, n):
    rng = np.random.default_rng(seed)
    m = order_space(n).m
    kernel = np.stack([np.stack([dirichlet(rng, m) for _ in range(m)]) for _ in range(n)])
    t = TransitionFunction(alts(n), kernel)
    nu = dirichlet(rng, m)
    for r in local_residuals(t, nu):
        assert abs(r.total()) < 1e-12
        D = menu_chain(t, r.menu) - menu_chain(t, r.menu & ~(1 << r.removed))
        assert np.allclose(nu @ D, r.eps, atol=1e-12)


@pytest.mark.parametrize("kind,expected", [
    ("full_support", False), ("invariant", True), ("consumption_independent", True)])
def test_equivalence_on_generated_kernels(kind, expected):
    for seed in range(5):
        t = example_transition(kind, alts(3), seed=seed, exact=True)
        for A in (None, 3, 5):
            report = equivalence_check(t, A)
            assert report.agree and report.menu_invariant is expected


def test_equivalence_needs_full_support():
    with pytest.raises(ValidationError):
        equivalence_check(example1_transition())


def test_disagreement_is_a_breach(monkeypatch):
    import cdru.invariance as inv

    t = example_transition("full_support", alts(3), seed=0, exact=True)
    monkeypatch.setattr(inv, "is_locally_invariant", lambda *a, **k: True)
    with pytest.raises(InternalBreach):
        inv.equivalence_check(t)


# --- size of failures --------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 8))
def test_gap_recovered_from_residuals(seed, m):
    rng = np.random.default_rng(seed)
    MA = np.stack([dirichlet(rng, m) for _ in range(m)])
    MAx = np.stack([dirichlet(rng, m) for _ in range(m)])
    nuA, nuAx = stationary(MA), stationary(MAx)
    epsA, epsAx, residual = residual_gap_relation(nuA, nuAx, MA, MAx)
    assert residual < 1e-12
    assert np.allclose(nuAx @ (MA - MAx), epsAx)
    # nu_Ax is invariant for MAx, so its residual is nu_Ax M_A - nu_Ax
    assert np.allclose(epsAx, nuAx @ MA - nuAx, atol=1e-12)
    gap = recover_gap(epsA, epsAx, MA, MAx)
    assert np.allclose(gap, nuA - nuAx, atol=1e-9)


def test_recovery_needs_rank():
    M = np.full((3, 3), 1 / 3)
    with pytest.raises(RankDeficient):
        recover_gap(np.zeros(3), np.zeros(3), M, M)


def test_cravings_removal_prediction():
    t = cravings_transition(cravings())
    pred, nuA, nuAx, eps = removal_prediction(t, 7, 2)
    kc = 4  # c > a > b
    assert pred.predicted[kc] == F(1, 3)
    assert list(pred.predicted) == list(nuAx)
    assert list(pred.difference) == list(nuA - nuAx)
    assert pred.states == (0, 2, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([3, 4]), st.data())
def test_cravings_prediction_matches(seed, n, data):
    t = cravings_transition(random_cravings(alts(n), seed=seed, exact=True))
    x = data.draw(st.integers(0, n - 1))
    pred, _, nuAx, _ = removal_prediction(t, (1 << n) - 1, x)
    assert list(pred.predicted) == list(nuAx)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_prediction_on_random_full_support(seed):
    rng = np.random.default_rng(seed)
    kernel = np.stack([np.stack([dirichlet(rng, 6) for _ in range(6)]) for _ in range(3)])
    t = TransitionFunction(alts(3), kernel)
    for x in range(3):
        pred, nuA, nuAx, _ = removal_prediction(t, 7, x)
        assert np.allclose(pred.predicted, nuAx, atol=1e-9)
        assert np.allclose(pred.difference, nuA - nuAx, atol=1e-9)


def test_degenerate_denominator():
    N = np.array([[2.0, 1.0], [1.0, 2.0]])
    with pytest.raises(DegenerateDenominator):
        passage_time_prediction(np.array([0.5, 0.5]), np.array([1.0, -1.0]), N)


def test_prediction_checks_state_list():
    N = np.array([[2.0]])
    with pytest.raises(ValidationError):
        passage_time_prediction(np.array([0.5, 0.5]), np.zeros(2), N, states=(0,))


def test_two_state_passage_prediction():
    # both chains on two states: closed form against the exact stationary
    MAx = np.array([[F(3, 4), F(1, 4)], [F(1, 2), F(1, 2)]], dtype=object)
    MA = np.array([[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]], dtype=object)
    nuA = stationary(MA)
    eps = nuA @ (MA - MAx)
    pred = passage_time_prediction(nuA, eps, mean_passage(MAx))
    assert list(pred.predicted) == [F(2, 3), F(1, 3)]


# --- no investment -----------------------------------------------------------

def test_investment_matrix_shape():
    G, cols = investment_matrix(intro_transition())
    assert G.shape == (6, 4 * 6) and len(cols) == 24
    # each block is a stochastic matrix minus the identity
    for j in range(0, 24, 6):
        assert all(sum(row) == 0 for row in G[:, j:j + 6])


def test_example1_has_no_plan():
    cert = no_investment_test(example1_transition())
    assert cert.invariant and cert.verify() and not cert.strict


@pytest.mark.parametrize("make", [intro_transition, lambda: cravings_transition(cravings())])
def test_plans_pay_in_every_state(make):
    cert = no_investment_test(make())
    assert cert.kind == "plan" and cert.verify()
    G = np.asarray(cert.matrix, dtype=object)
    col = {key: j for j, key in enumerate(cert.columns)}
    vec = np.array([F(0)] * G.shape[1], dtype=object)
    for key, v in cert.plan.items():
        vec[col[key]] = v
    assert all(v > 0 for v in G @ vec)


def test_tampered_plan_fails_verification():
    cert = no_investment_test(intro_transition())
    bad = type(cert)(cert.kind, cert.matrix, cert.columns, plan={k: -v for k, v in cert.plan.items()})
    assert not bad.verify()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["full_support", "invariant", "consumption_independent"]))
def test_no_investment_matches_direct(seed, kind):
    t = example_transition(kind, alts(3), seed=seed, exact=True)
    cert = no_investment_test(t)
    assert cert.verify()
    assert cert.invariant == is_menu_invariant_direct(t).holds
    if cert.invariant:
        assert cert.strict


def test_float_kernels_are_snapped():
    t = example_transition("full_support", alts(3), seed=4)
    assert no_investment_test(t).kind == "plan"


# --- joint menu and order dynamics -------------------------------------------

def test_iid_menus_always_joint_invariant():
    a = alts(3)
    t = example_transition("full_support", a, seed=1, exact=True)
    s = arrival(a, F(1, 4))
    assert joint_no_investment_test(t, s).invariant
    assert is_jointly_menu_invariant(t, s)


def test_sticky_menus_expose_consumption_dependence():
    a = alts(3)
    s = arrival(a, F(9, 10))
    t = example_transition("full_support", a, seed=1, exact=True)
    cert = joint_no_investment_test(t, s)
    assert cert.kind == "plan" and cert.verify()
    assert not is_jointly_menu_invariant(t, s)
    tc = example_transition("consumption_independent", a, seed=1, exact=True)
    assert joint_no_investment_test(tc, s).invariant
    assert is_jointly_menu_invariant(tc, s)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["full_support", "invariant"]),
       st.sampled_from([F(1, 2), F(3, 4), F(9, 10)]))
def test_joint_tests_agree(seed, kind, stay):
    a = alts(3)
    t = example_transition(kind, a, seed=seed, exact=True)
    s = arrival(a, stay)
    assert joint_no_investment_test(t, s).invariant == is_jointly_menu_invariant(t, s)


def test_joint_needs_full_support():
    a = alts(3)
    with pytest.raises(ValidationError):
        joint_no_investment_test(example1_transition(), arrival(a, F(1, 2)))


def test_interface_aliases():
    import cdru.invariance as inv

    assert inv.theorem1_check is inv.equivalence_check
    assert inv.prop5_relation is inv.residual_gap_relation
    assert inv.prop5_pseudoinverse is inv.recover_gap
    assert inv.prop6_predict is inv.passage_time_prediction
