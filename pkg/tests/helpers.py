"""Shared builders for the test suite."""

from fractions import Fraction as F

import numpy as np

from cdru.jointchoice import ChoiceRule, forward_rule
from cdru.lattice import AlternativeSet, members

LABELS = "abcd"


def alts(n):
    return AlternativeSet(tuple(LABELS[:n]))


def rand_dist(rng, m, k=None):
    """Exact distribution on ``k`` random orders (all when ``k`` is None)."""
    k = m if k is None else min(m, k)
    idx = rng.choice(m, size=k, replace=False)
    w = [int(v) for v in rng.integers(1, 10, size=k)]
    s = sum(w)
    out = np.array([F(0)] * m, dtype=object)
    for i, v in zip(idx, w):
        out[i] = F(v, s)
    return out


def random_cdrum(rng, n, T, sparse=3, state_independent=False):
    """Forward-generated rule from a random first distribution and history kernel."""
    a = alts(n)
    m = a.space.m
    cache = {}

    def kernel(xs, ks):
        key = xs if state_independent else (xs, ks)
        if key not in cache:
            cache[key] = rand_dist(rng, m, int(rng.integers(1, sparse + 1)))
        return cache[key]

    nu = rand_dist(rng, m, int(rng.integers(1, sparse + 1)))
    return forward_rule(a, nu, kernel, T)


def uniform_rcr(n):
    tab = np.array([[F(0)] * (1 << n) for _ in range(n)], dtype=object)
    for A in range(1, 1 << n):
        for x in members(A):
            tab[x, A] = F(1, len(members(A)))
    return tab


def product_rule(first, second, a):
    """Two-period rule with independent periods (``first`` and ``second`` one-period tables)."""
    return ChoiceRule(a, np.multiply.outer(first, second), T=2)
