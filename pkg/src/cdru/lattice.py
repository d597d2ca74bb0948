"""Alternatives, menus as bitmasks, linear orders and the superset Moebius transform.

Menus are integer bitmasks over alternative indices and are always iterated
in ascending mask order. Linear orders are best-first tuples of indices and
are enumerated lexicographically, so order ``k`` of ``order_space(n)`` is the
``k``-th permutation of ``range(n)``.

Choice tables of arity ``T`` are dense arrays with axes
``(x1, A1, x2, A2, ..., xT, AT)`` of sizes ``(n, 2**n) * T``. Entries with
``x_i`` outside ``A_i`` are structurally zero.
"""

import itertools
import os
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import _kernels
from .errors import ValidationError

__all__ = [
    "max_alternatives",
    "AlternativeSet",
    "OrderSpace",
    "order_space",
    "popcount",
    "members",
    "menus",
    "enumerate_orders",
    "maximizer",
    "n_set",
    "i_set",
    "valid_cells",
    "mobius",
    "zeta",
]

_HARD_MAX_N = 7


def max_alternatives():
    """Largest admissible ``n``; ``CDRU_MAX_N`` may lower (never raise) the ceiling of 7."""
    raw = os.environ.get("CDRU_MAX_N")
    if not raw:
        return _HARD_MAX_N
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"CDRU_MAX_N must be an integer, got {raw!r}") from None
    return max(2, min(value, _HARD_MAX_N))


def popcount(mask):
    return bin(mask).count("1")


def members(mask):
    """Indices in ``mask`` in increasing order."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def menus(n, min_size=1):
    """Nonempty menus of ``n`` alternatives with at least ``min_size`` members, ascending."""
    return [m for m in range(1, 1 << n) if popcount(m) >= min_size]


def enumerate_orders(n):
    return list(itertools.permutations(range(n)))


def maximizer(order, menu):
    """Best element of ``menu`` under the best-first ``order``."""
    if menu == 0:
        raise ValidationError("maximizer of the empty menu is undefined")
    for x in order:
        if (menu >> x) & 1:
            return x
    raise ValidationError("menu contains alternatives outside the order")


@dataclass(frozen=True)
class OrderSpace:
    """All linear orders on ``n`` alternatives with lookup tables.

    Attributes
    ----------
    orders : tuple of tuple
        Best-first permutations in lexicographic order.
    ranks : ndarray, shape (m, n)
        ``ranks[k, x]`` is the position of ``x`` in order ``k`` (0 is best).
    best : ndarray, shape (m, 2**n)
        ``best[k, A]`` is the maximizer of menu ``A`` under order ``k``.
    imenu : ndarray, shape (m, n)
        ``imenu[k, x]`` is the unique menu ``A`` with order ``k`` in ``I(x, A)``:
        ``x`` together with everything ranked below it.
    """

    n: int
    orders: tuple
    ranks: np.ndarray
    best: np.ndarray
    imenu: np.ndarray

    @property
    def m(self):
        return len(self.orders)

    @cached_property
    def index(self):
        return {o: k for k, o in enumerate(self.orders)}

    def n_mask(self, x, menu):
        """Boolean vector over orders: membership in ``N(x, menu)``."""
        return self.best[:, menu] == x

    def i_mask(self, x, menu):
        """Boolean vector over orders: membership in ``I(x, menu)``."""
        return self.imenu[:, x] == menu


@lru_cache(maxsize=None)
def order_space(n):
    if not 1 <= n <= _HARD_MAX_N:
        raise ValidationError(f"n must lie in [1, {_HARD_MAX_N}], got {n}")
    orders = tuple(enumerate_orders(n))
    ranks = np.empty((len(orders), n), dtype=np.int64)
    for k, o in enumerate(orders):
        ranks[k, list(o)] = np.arange(n)
    best = _kernels.maximizer_table(ranks)
    imenu = np.zeros((len(orders), n), dtype=np.int64)
    for k, o in enumerate(orders):
        below = 0
        for x in reversed(o):
            below |= 1 << x
            imenu[k, x] = below
    for arr in (ranks, best, imenu):
        arr.setflags(write=False)
    return OrderSpace(n, orders, ranks, best, imenu)


def n_set(x, menu, n):
    """Indices of orders whose maximizer on ``menu`` is ``x``."""
    return np.flatnonzero(order_space(n).n_mask(x, menu))


def i_set(x, menu, n):
    """Indices of orders ranking ``X \\ menu`` above ``x`` above ``menu \\ {x}``."""
    if not (menu >> x) & 1:
        return np.array([], dtype=np.int64)
    return np.flatnonzero(order_space(n).i_mask(x, menu))


@dataclass(frozen=True)
class AlternativeSet:
    """Finite labelled set of alternatives, ``2 <= n <= CDRU_MAX_N``."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate alternative labels: {labels}")
        if any(not s or ">" in s or "," in s for s in labels):
            raise ValidationError("labels must be nonempty and may not contain '>' or ','")
        limit = max_alternatives()
        if not 2 <= len(labels) <= limit:
            raise ValidationError(f"need between 2 and {limit} alternatives, got {len(labels)}")

    @property
    def n(self):
        return len(self.labels)

    @property
    def full(self):
        return (1 << self.n) - 1

    @property
    def space(self):
        return order_space(self.n)

    def index(self, label):
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValidationError(f"unknown alternative {label!r}") from None

    def mask(self, labels):
        out = 0
        for s in labels:
            out |= 1 << self.index(s)
        if out == 0:
            raise ValidationError("menus must be nonempty")
        return out

    def menu_labels(self, mask):
        return [self.labels[i] for i in members(mask)]

    def order_labels(self, order):
        if isinstance(order, (int, np.integer)):
            order = self.space.orders[int(order)]
        return [self.labels[i] for i in order]

    def order_index(self, labels):
        """Index of the order given as a best-first label list or ``"a>b>c"`` string."""
        if isinstance(labels, str):
            labels = [s.strip() for s in labels.split(">")]
        order = tuple(self.index(s) for s in labels)
        if sorted(order) != list(range(self.n)):
            raise ValidationError(f"{labels} is not a linear order of {self.labels}")
        return self.space.index[order]

    def order_string(self, order):
        return ">".join(self.order_labels(order))

    def menus(self, min_size=1):
        return menus(self.n, min_size)


def valid_cells(n, T):
    """Boolean array over the arity-``T`` layout: ``x_i`` belongs to ``A_i`` for every period."""
    one = np.zeros((n, 1 << n), dtype=bool)
    for x in range(n):
        for mask in range(1, 1 << n):
            one[x, mask] = bool((mask >> x) & 1)
    out = one
    for _ in range(T - 1):
        out = np.multiply.outer(out, one)
    return out


def _transform(table, T, n, sign):
    exact = table.dtype == object
    out = table.copy() if exact else np.asarray(table, dtype=np.float64).copy()
    for tau in range(T):
        axis = 2 * tau + 1
        moved = np.moveaxis(out, axis, -1)
        shape = moved.shape
        flat = moved.reshape(-1, 1 << n)
        if exact:
            flat = _kernels.numpy_impl["superset_transform"](flat, n, sign)
        else:
            flat = _kernels.superset_transform(flat, n, sign)
        out = np.moveaxis(flat.reshape(shape), -1, axis)
    out = np.ascontiguousarray(out)
    out[~valid_cells(n, T)] = 0
    return out


def mobius(table, T):
    """Superset Moebius inverse of an arity-``T`` choice table.

    ``q(x, A) = sum over A' >= A (componentwise) of prod (-1)**|A'_i - A_i| p(x, A')``.
    Object arrays stay exact.
    """
    n = table.shape[0]
    return _transform(table, T, n, -1)


def zeta(table, T):
    """Inverse of :func:`mobius`: sums over componentwise supersets."""
    n = table.shape[0]
    return _transform(table, T, n, 1)
