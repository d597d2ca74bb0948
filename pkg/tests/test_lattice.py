from fractions import Fraction as F
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdru.errors import ValidationError
from cdru.lattice import (
    AlternativeSet,
    i_set,
    max_alternatives,
    members,
    menus,
    mobius,
    n_set,
    order_space,
    popcount,
    valid_cells,
    zeta,
)

from helpers import uniform_rcr


def test_order_index_convention_n3():
    sp = order_space(3)
    assert sp.orders == tuple(permutations(range(3)))
    assert sp.index[(0, 1, 2)] == 0 and sp.index[(2, 1, 0)] == 5
    assert sp.m == 6


def test_best_and_imenu_by_brute_force():
    for n in (2, 3, 4):
        sp = order_space(n)
        for k, order in enumerate(sp.orders):
            assert sp.best[k, 0] == -1
            for A in range(1, 1 << n):
                assert sp.best[k, A] == next(x for x in order if (A >> x) & 1)
            for x in range(n):
                pos = order.index(x)
                below = sum(1 << y for y in order[pos:])
                assert sp.imenu[k, x] == below


def test_n_and_i_sets_partition():
    n = 3
    sp = order_space(n)
    for A in range(1, 8):
        hits = sum(sp.n_mask(x, A).astype(int) for x in members(A))
        assert np.all(hits == 1)
    for x in range(n):
        seen = sum(sp.i_mask(x, A).astype(int) for A in range(1, 8) if (A >> x) & 1)
        assert np.all(seen == 1)
    for x in range(n):
        for A in range(1, 8):
            if (A >> x) & 1:
                assert set(i_set(x, A, n)) <= set(n_set(x, A, n))
    assert list(n_set(0, 7, n)) == [0, 1]
    assert list(i_set(0, 7, n)) == [0, 1]
    assert list(i_set(0, 1, n)) == [3, 5]


def test_menus_and_popcount():
    assert menus(3) == list(range(1, 8))
    assert menus(3, 2) == [3, 5, 6, 7]
    assert popcount(7) == 3
    assert list(members(5)) == [0, 2]


def test_alternative_set_validation():
    a = AlternativeSet(("x", "y", "z"))
    assert a.order_index("z>y>x") == 5
    assert a.order_index(["x", "z", "y"]) == 1
    assert a.order_string(3) == "y>z>x"
    assert a.mask(["x", "z"]) == 5
    with pytest.raises(ValidationError):
        AlternativeSet(("x",))
    with pytest.raises(ValidationError):
        AlternativeSet(("x", "x"))
    with pytest.raises(ValidationError):
        AlternativeSet(("a>b", "c"))
    with pytest.raises(ValidationError):
        a.order_index("x>y>y")
    with pytest.raises(ValidationError):
        a.index("w")


def test_size_cap_from_environment(monkeypatch):
    monkeypatch.setenv("CDRU_MAX_N", "3")
    assert max_alternatives() == 3
    with pytest.raises(ValidationError):
        AlternativeSet(("a", "b", "c", "d"))
    monkeypatch.setenv("CDRU_MAX_N", "99")
    assert max_alternatives() == 7


def test_uniform_rcr_mobius_values():
    # inclusion-exclusion by hand: q(a,X)=1/3, q(a,{a,b})=1/2-1/3=1/6, q(a,{a})=1-1/2-1/2+1/3
    q = mobius(uniform_rcr(3), 1)
    assert q[0, 7] == F(1, 3)
    assert q[0, 3] == F(1, 6)
    assert q[0, 1] == F(1, 3)
    assert q[1, 1] == 0  # invalid cell masked


def test_mobius_against_explicit_sum():
    rng = np.random.default_rng(3)
    n = 3
    p = rng.random((n, 8))
    q = mobius(p, 1)
    for x in range(n):
        for A in range(1, 8):
            if not (A >> x) & 1:
                continue
            direct = sum((-1) ** (popcount(B) - popcount(A)) * p[x, B] for B in range(1, 8) if B & A == A)
            assert q[x, A] == pytest.approx(direct, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_zeta_inverts_mobius(n, T, seed):
    rng = np.random.default_rng(seed)
    tab = rng.random((n, 1 << n) * T)
    tab[~valid_cells(n, T)] = 0
    back = zeta(mobius(tab, T), T)
    assert np.allclose(back, tab, atol=1e-12)


def test_exact_and_float_transforms_agree():
    rng = np.random.default_rng(0)
    tab = rng.integers(0, 7, size=(3, 8, 3, 8))
    tab[~valid_cells(3, 2)] = 0
    exact = mobius(np.array(tab, dtype=object) * F(1, 7), 2)
    flt = mobius(tab / 7.0, 2)
    assert np.allclose(np.asarray(exact, dtype=float), flt, atol=1e-12)
