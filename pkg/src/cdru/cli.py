"""Command-line front end.

Exit codes: 0 success, 1 model rejected, 2 invalid input, 3 internal
consistency failure.
"""

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import _kernels, hypotest, invariance, jointchoice, schema
from .behaviors import (
    CravingSpec,
    HabitLogitSpec,
    cravings_transition,
    habit_logit_chain,
    habit_logit_stationary,
)
from .dynamics import ArrivalFunction, TransitionFunction, chain_structure, menu_chain, stationary
from .errors import CdruError, InternalBreach, NotRepresentable, ValidationError
from .lattice import members, order_space

EXIT_OK, EXIT_REJECT, EXIT_INVALID, EXIT_BREACH = 0, 1, 2, 3


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if type(v).__name__ == "mpq":
        return str(Fraction(int(v.numerator), int(v.denominator)))
    return v


def _text(obj, indent=0):
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and any(isinstance(x, (dict, list)) for x in
                                                         (v.values() if isinstance(v, dict) else v)):
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {json.dumps(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {json.dumps(v)}")
    else:
        lines.append(f"{pad}{json.dumps(obj)}")
    return lines


def _emit(report, args):
    report = _jsonable(report)
    body = json.dumps(report, indent=2) if args.format == "json" else "\n".join(_text(report))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body + "\n")
    else:
        print(body)


def _dist(alts, nu):
    if nu is None:
        return None
    return {alts.order_string(alts.space.orders[k]): v for k, v in enumerate(nu) if v != 0}


def _exact(args):
    return args.mode == "rational"


def _load_transition(path, exact):
    kind, obj = schema.load(path, exact)
    if isinstance(obj, CravingSpec):
        obj = cravings_transition(obj)
        obj = obj if exact else obj.to_float()
    if not isinstance(obj, TransitionFunction):
        raise ValidationError(f"expected a transition or cravings document, got {kind!r}")
    return obj


# --- commands ----------------------------------------------------------------

def cmd_invariance(args):
    t = _load_transition(args.input, _exact(args))
    alts = t.alts
    direct = invariance.is_menu_invariant_direct(t, args.tol)
    report = {
        "command": "invariance",
        "labels": list(alts.labels),
        "full_support": t.full_support,
        "direct": {
            "menu_invariant": direct.holds,
            "nu": _dist(alts, direct.nu),
            "witness": None if direct.witness is None else [alts.menu_labels(A) for A in direct.witness],
        },
    }
    verdicts = [direct.holds]
    if t.full_support:
        th = invariance.equivalence_check(t, tol=args.tol)
        report["local"] = {"reference_menu": alts.menu_labels(th.menu),
                           "locally_invariant": th.locally_invariant}
        verdicts.append(th.locally_invariant)
    elif direct.holds:
        local = invariance.is_locally_invariant(t, direct.nu, args.tol)
        report["local"] = {"reference": "common invariant distribution", "locally_invariant": local}
        verdicts.append(local)
    else:
        try:
            nu_x = stationary(menu_chain(t, alts.full))
            report["local"] = {"reference": "stationary distribution at the full menu",
                               "locally_invariant": invariance.is_locally_invariant(t, nu_x, args.tol)}
        except CdruError:
            report["local"] = {"reference": None, "locally_invariant": None}
    cert = invariance.no_investment_test(t)
    report["no_investment"] = {
        "branch": cert.kind,
        "nu": _dist(alts, cert.nu) if cert.invariant else None,
        "strictly_positive": cert.strict if cert.invariant else None,
        "plan": None if cert.invariant else [
            {"menu": alts.menu_labels(A), "order": alts.order_string(alts.space.orders[k]), "amount": v}
            for (A, k), v in cert.plan.items()],
    }
    verdicts.append(cert.invariant)
    if args.arrival:
        _, s = schema.load(args.arrival, _exact(args))
        if not isinstance(s, ArrivalFunction):
            raise ValidationError("--arrival must be an arrival document")
        joint = invariance.is_jointly_menu_invariant(t, s, args.tol)
        jc = invariance.joint_no_investment_test(t, s)
        report["joint"] = {"jointly_invariant": joint, "branch": jc.kind}
        if joint != jc.invariant:
            report["agree"] = False
            _emit(report, args)
            return EXIT_BREACH
    report["agree"] = len(set(verdicts)) == 1
    report["menu_invariant"] = direct.holds
    _emit(report, args)
    if not report["agree"]:
        return EXIT_BREACH
    return EXIT_OK if direct.holds else EXIT_REJECT


def _load_rule(args):
    _, p = schema.load(args.input, _exact(args))
    if not isinstance(p, jointchoice.ChoiceRule):
        raise ValidationError("expected a choice_rule document")
    return p


def cmd_axioms(args):
    p = _load_rule(args)
    reports = [jointchoice.check_complete_monotonicity(p, args.tol),
               jointchoice.check_marginality(p, args.tol),
               jointchoice.check_choice_set_independence(p, max(args.tol, 1e-9))]
    out = {"command": "axioms", "full_domain": p.full_domain, "T": p.T,
           "axioms": {r.axiom: r.to_dict() for r in reports}}
    out["cdrum"] = reports[0].holds and reports[1].holds
    out["state_independent_cdrum"] = out["cdrum"] and reports[2].holds
    _emit(out, args)
    return EXIT_OK if all(r.holds for r in reports) else EXIT_REJECT


def cmd_decompose(args):
    p = _load_rule(args)
    try:
        rep = jointchoice.decompose(p, state_independent=args.state_independent, tol=args.tol)
    except NotRepresentable as exc:
        _emit({"command": "decompose", "representable": False, "reason": str(exc)}, args)
        return EXIT_REJECT
    check = jointchoice.verify_representation(rep, p)
    alts = p.alts
    kernels = rep.si_kernels if rep.state_independent else rep.kernels
    out = {
        "command": "decompose",
        "representable": True,
        "first": _dist(alts, rep.first),
        "kernels": [
            {"consumed": [alts.labels[x] for x in (key if rep.state_independent else key[0])],
             "menus": None if rep.state_independent else [alts.menu_labels(A) for A in key[1]],
             "next": _dist(alts, dist)}
            for key, dist in kernels.items()],
        "reproduces": check.reproduces,
        "identification": check.identification,
        "max_error": check.max_error,
    }
    _emit(out, args)
    if not check.holds:
        return EXIT_BREACH
    return EXIT_OK


def cmd_hypotest(args):
    p = _load_rule(args)
    if not p.exact:
        p = p.to_exact()
    runs = []
    if args.method in ("extreme", "both"):
        runs.append(hypotest.test_extreme(p))
    if args.method in ("mobius", "both"):
        runs.append(hypotest.test_mobius(p, limited=True))
        runs.append(hypotest.test_mobius(p, limited=False))
    verdicts = {v.consistent for v in runs}
    out = {"command": "hypotest", "consistent": runs[0].consistent, "agree": len(verdicts) == 1
           and all(v.agree for v in runs), "tests": [v.to_dict() for v in runs]}
    _emit(out, args)
    if not out["agree"]:
        return EXIT_BREACH
    return EXIT_OK if out["consistent"] else EXIT_REJECT


def _simulate_orders(t, menu, length, rng):
    M = np.asarray(menu_chain(t, menu), dtype=float)
    best = order_space(t.n).best[:, menu]
    st = chain_structure(M)
    start = min(st.recurrent[0])
    counts = _kernels.simulate_emissions(np.cumsum(M, axis=1), best, start, rng.random(length), t.n)
    nu = np.asarray(stationary(menu_chain(t, menu)), dtype=float)
    analytic = np.zeros(t.n)
    np.add.at(analytic, best, nu)
    return counts / length, analytic


def _simulate_logit(spec, menu, length, rng):
    xs = members(menu)
    P = habit_logit_chain(spec, menu)
    counts = _kernels.simulate_emissions(np.cumsum(P, axis=1), np.arange(len(xs)), 0, rng.random(length), len(xs))
    freq = np.zeros(spec.alts.n)
    analytic = np.zeros(spec.alts.n)
    freq[list(xs)] = counts / length
    analytic[list(xs)] = habit_logit_stationary(spec, menu)
    return freq, analytic


def cmd_simulate(args):
    kind, obj = schema.load(args.input, exact=True)
    alts = obj.alts
    menu = alts.full if args.menu is None else alts.mask([s.strip() for s in args.menu.split(",")])
    rng = np.random.default_rng(args.seed)
    if isinstance(obj, HabitLogitSpec):
        freq, analytic = _simulate_logit(obj, menu, args.length, rng)
    else:
        t = cravings_transition(obj) if isinstance(obj, CravingSpec) else obj
        freq, analytic = _simulate_orders(t, menu, args.length, rng)
    err = float(np.max(np.abs(freq - analytic)))
    out = {
        "command": "simulate",
        "model": kind,
        "menu": alts.menu_labels(menu),
        "length": args.length,
        "seed": args.seed,
        "empirical": {alts.labels[x]: float(freq[x]) for x in members(menu)},
        "analytic": {alts.labels[x]: float(analytic[x]) for x in members(menu)},
        "max_abs_error": err,
        "backend": "numba" if _kernels.USE_NUMBA else "numpy",
    }
    _emit(out, args)
    return EXIT_OK


def cmd_matrix_sizes(args):
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        rows.append({"n": n, "E_rows": hypotest.count_E_rows(n), "F_lim_rows": hypotest.count_F_rows(n)})
    _emit({"command": "matrix-sizes", "sizes": rows}, args)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _positive(v):
    x = float(v)
    if not x > 0 or math.isnan(x):
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return x


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("rational", "float"), default="rational")
    common.add_argument("--tol", type=_positive, default=1e-10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    parser = argparse.ArgumentParser(prog="cdru", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariance", parents=[common], help="menu invariance verdicts for a transition function")
    p.add_argument("--input", required=True)
    p.add_argument("--arrival", default=None, help="arrival-function JSON for the joint test")
    p.set_defaults(func=cmd_invariance)

    p = sub.add_parser("axioms", parents=[common], help="check the joint choice axioms")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("decompose", parents=[common], help="recover and verify a representation")
    p.add_argument("--input", required=True)
    p.add_argument("--state-independent", action="store_true")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("hypotest", parents=[common], help="two-period consistency tests")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("extreme", "mobius", "both"), default="both")
    p.set_defaults(func=cmd_hypotest)

    p = sub.add_parser("simulate", parents=[common], help="simulate choices and compare with the stationary frequencies")
    p.add_argument("--input", required=True)
    p.add_argument("--menu", default=None, help="comma-separated labels (default: all alternatives)")
    p.add_argument("--length", type=int, default=1_000_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("matrix-sizes", parents=[common], help="row counts of the two test matrices")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=7)
    p.set_defaults(func=cmd_matrix_sizes)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalBreach as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_BREACH
    except NotRepresentable as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except CdruError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
