"""Command line front end: ``modflow sf|verify|table``.

Exit codes: 0 ok, 1 numerical failure or disagreement, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import cocycle, core
from .cuntz import CuntzAlgebra, closed_form_cuntz, parse_word
from .errors import InputError, ModflowError, NumericalFailure
from .fermion import FermionAlgebra, closed_form_fermion, parse_fermion_word
from .laurent import LaurentPolynomial
from .sampling import (cuntz_monomial_triple, cuntz_words, distinct_products, random_cuntz_element,
                       random_fermion_element)
from .spectral_flow import (ROUTES, compute_report, evaluate_at_exp_minus_beta, sf_equivariant)
from .tracetable import isometry_from_table, load_table, suq2_table, trace_audit

SCHEMA = "modflow/1"
EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------

def fmt_number(x):
    """12 significant digits; exact rationals as ``{"rational": "p/q", "decimal": ...}``."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return int(x.numerator)
        return {"rational": f"{x.numerator}/{x.denominator}", "decimal": fmt_number(float(x))}
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, complex):
        if x.imag == 0:
            return fmt_number(x.real)
        return {"re": fmt_number(x.real), "im": fmt_number(x.imag)}
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    return x


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, LaurentPolynomial):
        return {str(n): to_jsonable(c) for n, c in obj.coeffs.items()}
    return fmt_number(obj)


def emit(payload: dict, fmt: str, out, rows=None) -> None:
    if fmt == "json":
        json.dump(to_jsonable({"schema": SCHEMA, **payload}), out, indent=2, sort_keys=False)
        out.write("\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    if rows is None:
        flat = _flatten(to_jsonable(payload))
        writer.writerow(["key", "value"])
        for k, v in flat:
            writer.writerow([k, v])
    else:
        for row in rows:
            writer.writerow([_csv_cell(c) for c in row])


def _csv_cell(c):
    v = fmt_number(c)
    if isinstance(v, dict) and "rational" in v:
        return v["rational"]
    return v


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def _fermion_modes(args, factors=()) -> int:
    if getattr(args, "modes", None):
        return args.modes
    return max([j for j, _ in factors] + [1])


def build_target(args):
    """Return ``(element, ctx, closed_form, source, extrapolation_dependent, assumptions)``."""
    model = args.model
    if model == "cuntz":
        alg = CuntzAlgebra(args.n)
        alpha, beta = parse_word(args.word)
        v = alg.parse(args.word)
        return v, alg.kms_context(), closed_form_cuntz(alpha, beta, args.n), \
            "(|beta|-|alpha|)/n^|alpha|", False, []
    if model == "fermion":
        factors = parse_fermion_word(args.word)
        alg = FermionAlgebra(_fermion_modes(args, factors), args.lam)
        v = alg.parse(args.word)
        cf = closed_form_fermion(factors, args.lam)
        return v, alg.kms_context(), cf, "-n(1+e^beta)^-n" if cf is not None else None, False, []
    if model == "suq2":
        iso = suq2_table(args.q, args.k)
        return iso.element, iso.context(), iso.closed_form, "k q^2", True, \
            list(iso.range_table.assumptions)
    if model == "table":
        iso = isometry_from_table(load_table(args.table), args.degree)
        return iso.element, iso.context(), None, None, False, []
    raise InputError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_sf(args, out) -> int:
    routes = tuple(r.strip() for r in args.routes.split(",") if r.strip())
    v, ctx, cf, src, extrap, notes = build_target(args)
    rep = compute_report(v, ctx, routes, cf, src, extrap, notes)
    ok = rep.route_agreement <= args.tol and (
        rep.closed_form_deviation is None or rep.closed_form_deviation <= args.tol)
    payload = {"command": "sf", "model": args.model, "input": _input_label(args),
               "report": rep.to_dict(), "tolerance": args.tol, "ok": ok}
    emit(payload, args.format, out)
    return EXIT_OK if ok else EXIT_NUMERIC


def _input_label(args) -> str:
    if args.model in ("cuntz", "fermion"):
        return args.word
    if args.model == "suq2":
        return f"q={args.q:g},k={args.k}"
    return str(args.table)


def cmd_table(args, out) -> int:
    v, ctx, *_ = build_target(args)
    poly = sf_equivariant(v, ctx)
    chi = Fraction(1) / ctx.exp_beta if isinstance(ctx.exp_beta, Fraction) else 1.0 / ctx.exp_beta
    value = evaluate_at_exp_minus_beta(poly, ctx)
    if args.format == "csv":
        rows = [("n", "coefficient")] + [(n, c) for n, c in poly.coeffs.items()]
        rows.append((f"eval@{_csv_cell(chi)}", value))
        emit({}, "csv", out, rows)
    else:
        emit({"command": "table", "model": args.model, "input": _input_label(args),
              "coefficients": poly, "chi": chi, "evaluation": value}, "json", out)
    return EXIT_OK


# verify suites -------------------------------------------------------------

def _case(name, residual, tol):
    residual = float(residual)
    return {"case": name, "residual": residual, "pass": bool(residual <= tol)}


def _model_from_args(args):
    if args.model == "cuntz":
        alg = CuntzAlgebra(args.n)
    elif args.model == "fermion":
        alg = FermionAlgebra(args.modes or 3, args.lam)
    elif args.model == "suq2":
        return suq2_table(args.q, args.k)
    else:
        raise InputError(f"model {args.model!r} not supported by this suite")
    return alg


def _random_element(rng, alg):
    if isinstance(alg, CuntzAlgebra):
        return random_cuntz_element(rng, alg)
    return random_fermion_element(rng, alg)


def verify_kms(args, rng):
    target = _model_from_args(args)
    tol = args.tol if args.tol is not None else 1e-10
    cases = []
    if not isinstance(target, (CuntzAlgebra, FermionAlgebra)):
        alg, ctx = target.algebra, target.context()
        syms = ["v", "v*", "P", "Q"]
        for s in syms:
            for t in syms:
                a, b = alg.symbol(s), alg.symbol(t)
                try:
                    res = core.kms_identity_residual(a, b, ctx)
                except InputError:
                    continue
                cases.append(_case(f"({s},{t})", res, tol))
        return cases
    ctx = target.kms_context()
    for i in range(args.trials):
        a, b = _random_element(rng, target), _random_element(rng, target)
        cases.append(_case(f"pair {i}", core.kms_identity_residual(a, b, ctx), tol))
    return cases


def verify_cocycle(args, rng):
    alg = _model_from_args(args)
    if not isinstance(alg, (CuntzAlgebra, FermionAlgebra)):
        raise InputError("cocycle suite needs the cuntz or fermion model")
    ctx = alg.kms_context()
    tol = args.tol if args.tol is not None else 1e-10
    b_phi1 = cocycle.b_twisted(cocycle.phi1_cochain(ctx))
    B_psi = cocycle.B_twisted(cocycle.psi_cochain(ctx))
    cases = []
    for i in range(args.trials):
        if isinstance(alg, CuntzAlgebra):
            triple = cuntz_monomial_triple(rng, alg)
        else:
            triple = tuple(_random_element(rng, alg) for _ in range(3))
        cases.append(_case(f"b phi1 #{i}", abs(b_phi1(*triple)), tol))
        a = _random_element(rng, alg)
        cases.append(_case(f"B psi #{i}", max(abs(B_psi(a, r=r)) for r in (0.6, 1.0, 2.0)), tol))
        a0, a1 = _random_element(rng, alg), _random_element(rng, alg)
        cases.append(_case(f"cyclicity #{i}", cocycle.cyclicity_residual(a0, a1, ctx), tol))
    return cases


def verify_routes(args, rng):
    tol = args.tol if args.tol is not None else 1e-3
    cases = []
    if args.model == "cuntz":
        alg = CuntzAlgebra(args.n)
        ctx = alg.kms_context()
        for a, b in cuntz_words(args.n, args.max_word_len):
            v = alg.word(a, b)
            rep = compute_report(v, ctx, closed_form=closed_form_cuntz(a, b, args.n))
            exact = abs(rep.sf_trace - rep.closed_form)
            cases.append(_case(v.origin, max(exact, rep.closed_form_deviation), tol)
                         | {"sf_trace": rep.sf_trace, "sf_residue": rep.sf_residue})
    elif args.model == "fermion":
        alg = FermionAlgebra(args.modes or 4, args.lam)
        ctx = alg.kms_context()
        for w in distinct_products(alg.modes, args.max_word_len):
            rep = compute_report(alg.parse(w), ctx,
                                 closed_form=closed_form_fermion(parse_fermion_word(w), args.lam))
            cases.append(_case(w, rep.closed_form_deviation, tol)
                         | {"sf_trace": rep.sf_trace, "sf_residue": rep.sf_residue})
    elif args.model == "suq2":
        for k in range(1, args.k + 1):
            iso = suq2_table(args.q, k)
            rep = compute_report(iso.element, iso.context(), closed_form=iso.closed_form)
            cases.append(_case(f"k={k}", rep.closed_form_deviation, tol)
                         | {"sf_trace": rep.sf_trace, "sf_residue": rep.sf_residue,
                            "eta_contribution": rep.eta_contribution,
                            "extrapolation_dependent": True})
    else:
        raise InputError(f"model {args.model!r} not supported by the routes suite")
    return cases


def verify_dixmier(args, rng):
    tol = args.tol if args.tol is not None else 1e-3
    if args.model == "fermion":
        alg = FermionAlgebra(args.modes or 1, args.lam)
        a = alg.parse("a1 a1*")
    elif args.model == "cuntz":
        alg = CuntzAlgebra(args.n)
        a = alg.parse("S[1].S*[1]")
    else:
        raise InputError("dixmier suite needs the cuntz or fermion model")
    ctx = alg.kms_context()
    res = cocycle.dixmier_limit(a, ctx)
    case = _case(a.origin, abs(res.value - res.bound), tol)
    case.update({"value": res.value, "error": res.error, "two_phi": res.bound})
    return [case]


def verify_modular(args, rng):
    tol = args.tol if args.tol is not None else 1e-10
    alg = _model_from_args(args)
    cases = []
    if isinstance(alg, CuntzAlgebra):
        samples = [alg.S(i) for i in range(1, alg.n + 1)] + [alg.parse("S[1,2].S*[1]")]
    elif isinstance(alg, FermionAlgebra):
        gens = [alg.generator(j) for j in range(1, alg.modes + 1)]
        samples = gens + [gens[0] + gens[0].H]
        if alg.modes > 1:
            samples.append(gens[0] * gens[1])
    else:
        samples = [alg.element]
    for v in samples:
        rep = core.classify_modular(v, tol)
        cases.append({"case": v.origin or "element", "residual": rep.max_violation,
                      "pass": rep.is_modular})
        u = core.doubling_unitary(v)
        cases.append({"case": f"u({v.origin})", "residual": core.classify_modular(u, tol).max_violation,
                      "pass": core.classify_modular(u, tol).is_modular})
        if isinstance(alg, FermionAlgebra):
            worst = 0.0
            for t in np.linspace(0.1, 3.0, 5):
                x = core.multiply(v, core.gauge(core.adjoint(v), float(t)))
                off = [k for k in x.degrees if k != 0]
                worst = max([worst] + [x.component(k).norm() for k in off])
            cases.append(_case(f"gauge({v.origin})", worst, tol))
    return cases


def verify_inequality(args, rng):
    targets = []
    if args.model == "cuntz":
        alg = CuntzAlgebra(args.n)
        targets = [(alg.word(a, b), alg.kms_context()) for a, b in cuntz_words(args.n, 2)]
    elif args.model == "fermion":
        alg = FermionAlgebra(args.modes or 3, args.lam)
        targets = [(alg.parse(w), alg.kms_context()) for w in distinct_products(alg.modes, alg.modes)]
    elif args.model == "suq2":
        isos = [suq2_table(args.q, k) for k in range(1, args.k + 1)]
        targets = [(i.element, i.context()) for i in isos]
    elif args.model == "table":
        iso = isometry_from_table(load_table(args.table), args.degree)
        targets = [(iso.element, iso.context())]
    with trace_audit() as audit:
        for v, ctx in targets:
            compute_report(v, ctx)
    return [{"case": "all accesses", "residual": audit.worst_ratio, "checks": audit.checks,
             "violations": audit.violations, "pass": audit.violations == 0}]


SUITES = {"kms": verify_kms, "cocycle": verify_cocycle, "routes": verify_routes,
          "dixmier": verify_dixmier, "modular": verify_modular, "inequality": verify_inequality}


def cmd_verify(args, out) -> int:
    rng = np.random.default_rng(args.seed)
    cases = SUITES[args.suite](args, rng)
    ok = all(c["pass"] for c in cases)
    if args.format == "csv":
        keys = list(dict.fromkeys(k for c in cases for k in c))
        rows = [keys] + [[c.get(k, "") for k in keys] for c in cases]
        emit({}, "csv", out, rows)
    else:
        emit({"command": "verify", "suite": args.suite, "model": args.model,
              "cases": cases, "passed": sum(c["pass"] for c in cases),
              "total": len(cases), "ok": ok}, "json", out)
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _positive_float(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def _model_options(p: argparse.ArgumentParser, word_default: str | None = None) -> None:
    p.add_argument("--n", type=int, default=2, help="Cuntz: number of generators (default 2)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.25,
                   help="Fermion: Powers parameter in (0, 1/2) (default 0.25)")
    p.add_argument("--modes", type=int, default=None,
                   help="Fermion: number of modes (default: largest index in the word)")
    p.add_argument("--q", type=float, default=0.5, help="SU_q(2): deformation parameter (default 0.5)")
    p.add_argument("--k", type=int, default=1, help="SU_q(2): isometry index k (default 1)")
    p.add_argument("--table", help="JSON trace table for the 'table' model")
    p.add_argument("--degree", type=int, default=None, help="table model: override the degree")
    p.add_argument("--word", default=word_default, help="word literal, e.g. 'S[1,2].S*[1]' or 'a1 a2*'")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modflow", description="Modular index computations.")
    sub = parser.add_subparsers(dest="command", required=True)

    sf = sub.add_parser("sf", help="spectral flow of one element by all routes")
    sf.add_argument("model", choices=("cuntz", "fermion", "suq2", "table"))
    _model_options(sf)
    sf.add_argument("--routes", default=",".join(ROUTES), help="comma separated subset of routes")
    sf.add_argument("--tol", type=_positive_float, default=1e-3, help="route agreement tolerance")

    tb = sub.add_parser("table", help="equivariant flow as a Laurent polynomial")
    tb.add_argument("model", choices=("cuntz", "fermion", "suq2", "table"))
    _model_options(tb)
    tb.set_defaults(format=None)
    tb.add_argument("--tol", type=_positive_float, default=None)

    vf = sub.add_parser("verify", help="run an identity suite")
    vf.add_argument("suite", choices=tuple(SUITES))
    vf.add_argument("--model", choices=("cuntz", "fermion", "suq2", "table"), default="fermion")
    _model_options(vf)
    vf.add_argument("--trials", type=int, default=50)
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--max-word-len", type=int, default=2)
    vf.add_argument("--tol", type=_positive_float, default=None)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command == "table" and args.format is None:
        args.format = "csv"
    if getattr(args, "word", None) is None and args.command in ("sf", "table") \
            and args.model in ("cuntz", "fermion"):
        print("error: --word is required for this model", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "model", None) == "table" and not args.table:
        print("error: --table is required for the table model", file=sys.stderr)
        return EXIT_INPUT
    try:
        handler = {"sf": cmd_sf, "table": cmd_table, "verify": cmd_verify}[args.command]
        return handler(args, out)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ModflowError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
