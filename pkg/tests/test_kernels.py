import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdru import _kernels
from cdru.hypotest import build_E
from cdru.lattice import order_space

numba_only = pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not installed")


def both(name, *args):
    return _kernels.numpy_impl[name](*args), _kernels.numba_impl[name](*args)


@numba_only
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_maximizer_table_parity(n):
    ranks = np.ascontiguousarray(order_space(n).ranks, dtype=np.int64)
    a, b = both("maximizer_table", ranks)
    assert np.array_equal(a, b)
    assert (a[:, 0] == -1).all()


@numba_only
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 4))
def test_superset_transform_parity(seed, nbits, rows):
    arr = np.random.default_rng(seed).normal(size=(rows, 1 << nbits))
    for sign in (-1.0, 1.0):
        a, b = both("superset_transform", arr, nbits, sign)
        assert np.allclose(a, b, atol=1e-12)
    back = _kernels.numpy_impl["superset_transform"](a, nbits, -1.0)
    assert np.allclose(back, arr, atol=1e-10)


@numba_only
def test_simulation_parity():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(5), size=5)
    cum = np.cumsum(P, axis=1)
    emit = np.array([0, 1, 1, 2, 0], dtype=np.int64)
    u = rng.random(20_000)
    a, b = both("simulate_emissions", cum, emit, 2, u, 3)
    assert np.array_equal(a, b) and a.sum() == 20_000


@numba_only
def test_power_iteration_parity():
    P = np.random.default_rng(1).dirichlet(np.ones(6), size=6)
    x0 = np.full(6, 1 / 6)
    (a, _), (b, _) = both("power_iteration", P, x0, 1e-14, 100_000)
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(a @ P, a, atol=1e-12)


@numba_only
def test_extreme_fill_parity(monkeypatch):
    pairs = [(A, B) for A in (3, 5, 7) for B in (6, 7)]
    ref = build_E(3, pairs).matrix
    monkeypatch.setattr(_kernels, "_active", _kernels.numba_impl)
    assert np.array_equal(build_E(3, pairs).matrix, ref)


def test_env_flag_selects_numpy():
    env = dict(os.environ, CDRU_DISABLE_NUMBA="1")
    code = "from cdru import _kernels; print(_kernels.USE_NUMBA, _kernels._active is _kernels.numpy_impl)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
