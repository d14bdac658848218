"""Command-line front end.

Exit codes: 0 success, 2 usage or parse error, 3 some local factor did not
stabilise, 4 a resource guard tripped.
"""

import argparse
import csv
import io
import json
import math
import re
import sys
from fractions import Fraction

from .arith import NotStabilized, ResourceLimitError, fraction_json

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_RESOURCE = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- literals ----------------------------------------------------------------

def parse_form(text: str):
    from .qform import QuadraticForm

    try:
        return QuadraticForm.parse(text)
    except ValueError as exc:
        raise UsageError(f"bad form literal '{text}': {exc}") from None


def parse_forms(text: str):
    """Semicolon- or space-separated forms; "1,0,1x4" repeats a form."""
    out = []
    for item in re.split(r"[;\s]+", text.strip()):
        if not item:
            continue
        m = re.fullmatch(r"(.+?)x(\d+)", item)
        lit, rep = (m.group(1), int(m.group(2))) if m else (item, 1)
        out += [parse_form(lit)] * rep
    if not out:
        raise UsageError("no forms given")
    return out


def parse_system(text: str):
    from .lattice import AffineSystem

    try:
        return AffineSystem.parse(text)
    except ValueError as exc:
        raise UsageError(f"bad system literal: {exc}") from None


def parse_matrix(text: str):
    rows = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            try:
                rows.append([int(x) for x in part.split()])
            except ValueError:
                raise UsageError(f"bad matrix row '{part}'") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError("matrix rows must be nonempty and of equal length")
    return rows


def _round_floats(obj):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.15g}")
        return str(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, Fraction):
        return fraction_json(obj)
    return obj


def emit_json(obj, out):
    out.write(json.dumps(_round_floats(obj), indent=2, sort_keys=True))
    out.write("\n")


def _positive(name, value):
    if value is not None and value <= 0:
        raise UsageError(f"{name} must be positive")


# -- commands ----------------------------------------------------------------

def cmd_repcount(args, out):
    from .qform import rep_count

    f = parse_form(args.form)
    if args.n < 0:
        raise UsageError("n must be nonnegative")
    out.write(f"{rep_count(f, args.n)}\n")


def cmd_table(args, out):
    from .qform import rep_table, write_table_binary, write_table_csv

    f = parse_form(args.form)
    _positive("N", args.N)
    tab = rep_table(f, args.N)
    if args.format == "csv":
        if args.output:
            with open(args.output, "w", newline="") as fh:
                write_table_csv(fh, tab)
        else:
            write_table_csv(out, tab)
    else:
        if not args.output:
            raise UsageError("binary tables need --output")
        write_table_binary(args.output, f, tab)
        emit_json({"written": args.output, "N": args.N, "form": list(f.as_tuple())}, out)


def _body(args, d):
    from .lattice import ConvexBody

    if args.body:
        try:
            spec = json.loads(args.body)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad body JSON: {exc}") from None
        return ConvexBody.from_json(spec)
    if args.N is None:
        raise UsageError("give --N or --body")
    return ConvexBody(box=[(1, args.N)] * d)


def cmd_series(args, out):
    from .correlate import rhs_predict
    from .lattice import ConvexBody

    forms = parse_forms(args.forms)
    system = parse_system(args.system)
    if len(forms) == 1 and system.t > 1:
        forms = forms * system.t
    if len(forms) != system.t:
        raise UsageError(f"{len(forms)} forms for a system of {system.t} linear forms")
    pair = system.dependent_pair()
    if pair is not None:
        raise UsageError(f"infinite complexity: linear forms {pair[0] + 1} ({system.linear[pair[0]]}) "
                         f"and {pair[1] + 1} ({system.linear[pair[1]]}) are affinely dependent")
    _positive("P_max", args.P_max)
    _positive("depth", args.depth)
    if args.convergence:
        Ns = [int(x) for x in args.convergence.split(",")]
        rows = []
        for N in Ns:
            _positive("N", N)
            rep = rhs_predict(ConvexBody(box=[(1, N)] * system.d), system, forms, args.P_max, args.depth)
            rows.append((N, rep.lhs, rep.rhs, rep.ratio, rep.unstable))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["N", "lhs", "rhs", "ratio"])
        for N, lhs, rhs, ratio, _ in rows:
            w.writerow([N, lhs, f"{rhs:.15g}", f"{ratio:.15g}"])
        unstable = sorted({p for r in rows for p in r[4]})
    else:
        K = _body(args, system.d)
        rep = rhs_predict(K, system, forms, args.P_max, args.depth)
        emit_json(rep.to_json(), out)
        unstable = rep.unstable
    if unstable:
        sys.stderr.write(f"local factors did not stabilise at p = {unstable}\n")
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_local(args, out):
    from .local import beta_p

    forms = parse_forms(args.forms)
    system = parse_system(args.system)
    if len(forms) == 1 and system.t > 1:
        forms = forms * system.t
    try:
        lf = beta_p(forms, system, args.p, args.depth)
    except NotStabilized as exc:
        payload = {"p": args.p, "stabilized": False}
        if exc.best is not None:
            payload.update(exc.best.to_json())
        emit_json(payload, out)
        return EXIT_UNSTABLE
    data = lf.to_json()
    data["value_float"] = float(lf.value)
    emit_json(data, out)
    return EXIT_OK


def cmd_zeros(args, out):
    from .correlate import zeros_count, zeros_predict

    A = parse_matrix(args.A)
    forms = parse_forms(args.forms)
    _positive("N", args.N)
    try:
        if args.convergence:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["N", "lhs", "rhs", "ratio"])
            unstable = set()
            for N in [int(x) for x in args.convergence.split(",")]:
                rep = zeros_predict(forms, A, N, args.P_max, args.depth)
                unstable |= set(rep.unstable)
                w.writerow([N, rep.lhs, f"{rep.rhs:.15g}", f"{rep.ratio:.15g}"])
            return EXIT_UNSTABLE if unstable else EXIT_OK
        if args.predict:
            rep = zeros_predict(forms, A, args.N, args.P_max, args.depth)
            emit_json(rep.to_json(), out)
            return EXIT_UNSTABLE if rep.unstable else EXIT_OK
        emit_json(zeros_count(forms, A, args.N, args.method).to_json(), out)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


def cmd_equid(args, out):
    from .equid import equid_test, parse_poly, weyl_witness

    try:
        g = parse_poly(args.poly)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _positive("N", args.N)
    _positive("delta", args.delta)
    rep = equid_test(g, args.N, args.delta, args.K_max, args.Q_max)
    data = rep.to_json()
    data["weyl_witness"] = weyl_witness(g, args.N, args.delta)
    data["polynomial"] = g.to_json()
    emit_json(data, out)
    return EXIT_OK


def majorant_checks(N: int = 10**5, gamma: float = 1 / 8, w: int = 3, C1: float = 0.1,
                    n_max: int = 10**4, D: int = -4, form=(1, 0, 1), C1_exceptional: float = 2.0):
    """The three pointwise majorisations, each as (name, violations, tested)."""
    import numpy as np

    from .majorant import DivisorMajorant, SelbergWeight, WTrickedMajorant, p_star_indicator
    from .majorant import r_prime_values, wtrick_context
    from .qform import rep_table

    results = []
    dm = DivisorMajorant(D, N, gamma, C1_exceptional)
    bad = dm.check(n_max)
    results.append({"check": "tau_D/sqrt(log N) <= C nu", "tested": n_max, "violations": len(bad),
                    "first": [int(x) for x in bad[:5]], "C": dm.C})
    sw = SelbergWeight(D, N, gamma)
    ind = p_star_indicator(D, n_max)[1:]
    lhs = ind * math.sqrt(math.log(N))
    rhs = sw.values()[1 : n_max + 1] / sw.C_prime
    bad = np.flatnonzero(lhs > rhs * (1 + 1e-12) + 1e-12) + 1
    results.append({"check": "1_P*(n) sqrt(log N) <= beta(n)/C'", "tested": n_max,
                    "violations": len(bad), "first": [int(x) for x in bad[:5]], "C_prime": sw.C_prime})
    ctx = wtrick_context(N, w, C1)
    m_top = max(n_max, N // ctx.W)
    size = ctx.W * (m_top + 1) + 1
    maj = WTrickedMajorant(ctx, D, gamma, size)
    tab = rep_table(form, size)
    prod = maj.product()
    ms = np.arange(1, m_top + 1)
    viol, tested = 0, 0
    for b in ctx.admissible_set(form):
        r = r_prime_values(ctx, form, b, ms, tab)
        viol += int(np.count_nonzero(r > prod[ctx.W * ms + b] * (1 + 1e-12)))
        tested += len(ms)
    results.append({"check": "r'_{f,b}(m) <= beta'nu'(W m + b)", "tested": tested, "violations": viol,
                    "W": ctx.W, "residues": len(ctx.admissible_set(form)), "m_max": m_top})
    return results


def cmd_majorant(args, out):
    if args.action != "check":
        raise UsageError("only 'majorant check' is available")
    for name in ("N", "gamma", "w", "C1"):
        _positive(name, getattr(args, name))
    res = majorant_checks(args.N, args.gamma, args.w, args.C1, args.n_max)
    emit_json({"N": args.N, "gamma": args.gamma, "w": args.w, "C1": args.C1, "checks": res,
               "all_pass": all(r["violations"] == 0 for r in res)}, out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="qcorr", description="Representation counts, correlations and majorants "
                                          "for binary quadratic forms.")
    p.add_argument("--config", help="JSON file of defaults; explicit flags win")
    p.add_argument("--output", "-o", help="write the result here instead of stdout")
    p.add_argument("--workers", type=int, default=None, help="parallelism cap (kept for interface "
                   "compatibility; evaluation is sequential and deterministic)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("repcount", help="R_f(n)")
    s.add_argument("--form", required=True)
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_repcount)

    s = sub.add_parser("table", help="R_f(n) for 0 <= n <= N")
    s.add_argument("--form", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--format", choices=["bin", "csv"], default="csv")
    s.set_defaults(func=cmd_table)

    def series_args(s):
        s.add_argument("--forms", required=True)
        s.add_argument("--P-max", dest="P_max", type=int, default=100)
        s.add_argument("--depth", type=int, default=10)
        s.add_argument("--convergence", help="comma-separated N values; emits CSV")

    s = sub.add_parser("series", help="both sides of the correlation asymptotic")
    series_args(s)
    s.add_argument("--system", required=True, help='e.g. "1 0 : 0; 0 1 : 0; 1 1 : 0"')
    s.add_argument("--N", type=int)
    s.add_argument("--body", help='JSON {"box": [[lo,hi],...]} or {"ineq": {"M": ..., "b": ...}}')
    s.set_defaults(func=cmd_series)

    s = sub.add_parser("local", help="a single local factor beta_p")
    s.add_argument("--forms", required=True)
    s.add_argument("--system", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--depth", type=int, default=10)
    s.set_defaults(func=cmd_local)

    s = sub.add_parser("zeros", help="zeros of a diagonal system of forms")
    series_args(s)
    s.add_argument("--A", required=True, help='rows separated by ";", e.g. "1 1 -1 -1"')
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--method", choices=["auto", "convolution", "kernel"], default="auto")
    s.add_argument("--predict", action="store_true", help="also compute the predicted count")
    s.set_defaults(func=cmd_zeros)

    s = sub.add_parser("equid", help="exponential-sum equidistribution test")
    s.add_argument("--poly", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--K-max", dest="K_max", type=int, default=50)
    s.add_argument("--Q-max", dest="Q_max", type=int, default=50)
    s.set_defaults(func=cmd_equid)

    s = sub.add_parser("majorant", help="pointwise majorant checks")
    s.add_argument("action", choices=["check"])
    s.add_argument("--N", type=int, default=10**5)
    s.add_argument("--gamma", type=float, default=1 / 8)
    s.add_argument("--w", type=int, default=3)
    s.add_argument("--C1", type=float, default=0.1)
    s.add_argument("--n-max", dest="n_max", type=int, default=10**4)
    s.set_defaults(func=cmd_majorant)
    return p


def _apply_config(parser, argv):
    """Re-parse with config-file values as defaults so command-line flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    # find the subcommand without enforcing required flags yet
    command = next((a for a in (argv if argv is not None else sys.argv[1:])
                    if a in parser._subparsers._group_actions[0].choices), None)
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    sub = parser._subparsers._group_actions[0].choices.get(command) if command else None
    if sub is not None:
        dests = {a.dest for a in sub._actions}
        unknown = set(cfg) - dests - {a.dest for a in parser._actions}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
        for a in sub._actions:
            if a.dest in cfg:
                a.required = False
    parser.set_defaults(**{k: v for k, v in cfg.items() if k in {a.dest for a in parser._actions}})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    out = io.StringIO()
    try:
        args = _apply_config(parser, argv)
        if not getattr(args, "command", None):
            raise UsageError("missing command")
        code = args.func(args, out) or EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"qcorr: error: {exc}\n")
        return EXIT_USAGE
    except ResourceLimitError as exc:
        sys.stderr.write(f"qcorr: resource limit: {exc}\n")
        return EXIT_RESOURCE
    except NotStabilized as exc:
        sys.stderr.write(f"qcorr: {exc}\n")
        return EXIT_UNSTABLE
    except ValueError as exc:
        sys.stderr.write(f"qcorr: error: {exc}\n")
        return EXIT_USAGE
    text = out.getvalue()
    if args.output and args.command != "table":
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
