"""JSON input formats.

Every document carries a ``kind`` and the alternative ``labels``.
Probabilities may be numbers, decimal strings or ``"num/den"`` strings;
orders are ``"a>b>c"`` strings or best-first label lists.

``transition``
    ``{"kernel": [{"consumed": "a" | "*", "order": "a>b>c" | "*",
    "next": {"b>c>a": "1/2", ...}}, ...]}``. Entries are applied in file
    order, later ones overriding earlier ones, and must cover every
    (consumed, order) pair.
``arrival``
    ``{"menus": [["a", "b"], ...], "matrix": [[...], ...]}``; menus default
    to every menu with two or more alternatives in mask order.
``cravings``
    ``{"base": "a>b>c", "weights": {"a": "0.5", ...},
    "persistence": {"a": {"b": "0.2", ...}, ...}}``; self-persistence is 0.
``habit_logit``
    ``{"outside": "o", "v": {...}, "c": {...}}``; missing entries are 0.
``choice_rule``
    ``{"T": 2, "cells": [{"choices": ["a", "b"], "menus": [["a", "b"], ["b"]],
    "p": "1/2"}, ...], "observed": [[["a", "b"], ["b"]], ...]}``; omitted
    cells are zero and ``observed`` defaults to the menu tuples in ``cells``.
"""

import json
from fractions import Fraction

import numpy as np

from ._exact import to_fraction
from .behaviors import CravingSpec, HabitLogitSpec
from .dynamics import ArrivalFunction, TransitionFunction
from .errors import ValidationError
from .jointchoice import ChoiceRule
from .lattice import AlternativeSet

__all__ = ["KINDS", "load", "parse", "dump_transition", "dump_choice_rule"]

KINDS = ("transition", "arrival", "cravings", "habit_logit", "choice_rule")


def _number(v, exact):
    try:
        f = to_fraction(v)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"not a probability: {v!r}") from exc
    return f if exact else float(f)


def _alts(doc):
    labels = doc.get("labels")
    if not isinstance(labels, list):
        raise ValidationError("'labels' must be a list of alternative names")
    return AlternativeSet(tuple(str(v) for v in labels))


def _menu(alts, labels):
    if isinstance(labels, str):
        labels = [labels]
    mask = alts.mask(labels)
    if mask == 0:
        raise ValidationError("menus must be nonempty")
    return mask


def _order(alts, spec):
    try:
        return alts.order_index(spec)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad order {spec!r}") from exc


def _transition(doc, alts, exact):
    n, m = alts.n, alts.space.m
    K = np.empty((n, m, m), dtype=object)
    filled = np.zeros((n, m), dtype=bool)
    for entry in doc.get("kernel", []):
        row = np.array([Fraction(0)] * m, dtype=object)
        for order, w in entry["next"].items():
            row[_order(alts, order)] = _number(w, True)
        xs = range(n) if entry.get("consumed", "*") == "*" else [alts.index(entry["consumed"])]
        ks = range(m) if entry.get("order", "*") == "*" else [_order(alts, entry["order"])]
        for x in xs:
            for k in ks:
                K[x, k] = row
                filled[x, k] = True
    if not filled.all():
        x, k = map(int, np.argwhere(~filled)[0])
        raise ValidationError(f"no kernel row for consumed {alts.labels[x]!r} at order "
                              f"{alts.order_string(alts.space.orders[k])!r}")
    t = TransitionFunction(alts, K)
    return t if exact else t.to_float()


def _arrival(doc, alts, exact):
    menus = doc.get("menus")
    menus = None if menus is None else [_menu(alts, A) for A in menus]
    rows = [[_number(v, exact) for v in r] for r in doc["matrix"]]
    return ArrivalFunction(alts, np.array(rows, dtype=object if exact else float), menus)


def _cravings(doc, alts, exact):
    n = alts.n
    base = alts.space.orders[_order(alts, doc["base"])]
    w = np.empty(n, dtype=object if exact else float)
    for label, v in doc["weights"].items():
        w[alts.index(label)] = _number(v, exact)
    phi = np.empty((n, n), dtype=object if exact else float)
    phi[:] = Fraction(0) if exact else 0.0
    given = np.zeros((n, n), dtype=bool)
    for x, row in doc["persistence"].items():
        for y, v in row.items():
            phi[alts.index(x), alts.index(y)] = _number(v, exact)
            given[alts.index(x), alts.index(y)] = True
    missing = [(a, b) for a in range(n) for b in range(n) if a != b and not given[a, b]]
    if missing:
        a, b = missing[0]
        raise ValidationError(f"persistence for consuming {alts.labels[a]!r} while craving {alts.labels[b]!r} is missing")
    return CravingSpec(alts, base, w, phi)


def _habit(doc, alts):
    n = alts.n
    v = np.zeros(n)
    c = np.zeros(n)
    for label, val in doc.get("v", {}).items():
        v[alts.index(label)] = float(to_fraction(val))
    for label, val in doc.get("c", {}).items():
        c[alts.index(label)] = float(to_fraction(val))
    return HabitLogitSpec(alts, alts.index(doc["outside"]), v, c,
                          allow_negative_habit=bool(doc.get("allow_negative_habit", False)))


def _choice_rule(doc, alts, exact):
    T = int(doc["T"])
    cells = {}
    for c in doc["cells"]:
        xs = tuple(alts.index(x) for x in c["choices"])
        As = tuple(_menu(alts, A) for A in c["menus"])
        cells[(xs, As)] = _number(c["p"], True)
    observed = doc.get("observed")
    if observed is not None:
        observed = [tuple(_menu(alts, A) for A in At) for At in observed]
    p = ChoiceRule.from_cells(alts, T, cells, observed, exact=True)
    return p if exact else p.to_float()


def parse(doc, exact=True):
    """Build the object described by a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ValidationError("top level must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"'kind' must be one of {KINDS}, got {kind!r}")
    alts = _alts(doc)
    try:
        if kind == "transition":
            return _transition(doc, alts, exact)
        if kind == "arrival":
            return _arrival(doc, alts, exact)
        if kind == "cravings":
            return _cravings(doc, alts, exact)
        if kind == "habit_logit":
            return _habit(doc, alts)
        return _choice_rule(doc, alts, exact)
    except KeyError as exc:
        raise ValidationError(f"missing field or unknown label {exc}") from exc


def load(path, exact=True):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from exc
    return doc.get("kind"), parse(doc, exact)


def dump_transition(t):
    alts = t.alts
    entries = []
    for x in range(t.n):
        for k, order in enumerate(alts.space.orders):
            row = t.kernel[x, k]
            entries.append({
                "consumed": alts.labels[x],
                "order": alts.order_string(order),
                "next": {alts.order_string(alts.space.orders[j]): str(to_fraction(v))
                         for j, v in enumerate(row) if v != 0},
            })
    return {"kind": "transition", "labels": list(alts.labels), "kernel": entries}


def dump_choice_rule(p):
    alts = p.alts
    cells = []
    for xs, As, v in p.cells():
        if v != 0:
            cells.append({"choices": [alts.labels[x] for x in xs],
                          "menus": [alts.menu_labels(A) for A in As], "p": str(to_fraction(v))})
    out = {"kind": "choice_rule", "labels": list(alts.labels), "T": p.T, "cells": cells}
    if not p.full_domain:
        out["observed"] = [[alts.menu_labels(A) for A in At] for At in p.observed]
    return out
