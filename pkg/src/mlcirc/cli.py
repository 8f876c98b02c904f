"""``mlcirc`` command line.

Reports go to stdout as JSON (canonical with --canonical), a one-line
summary goes to stderr. Artifacts (circuits, polynomials, families) are
written in their own file format to -o when given, otherwise embedded in
the report.

Exit codes: 0 success, 1 property failure or error (JSON diagnostics),
2 usage, 3 resource guard.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable

from mlcirc import fullrank, leveled, pipeline, polymethod, setfam
from mlcirc.algebra import FieldCtx
from mlcirc.circuit import Circuit, read_circuit
from mlcirc.derivative import bs_transform
from mlcirc.errors import CircuitError, MlcircError, ResourceError
from mlcirc.poly import MultilinearPoly, Partition, build_pdm, mask_of, rank_yz

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


class UsageError(Exception):
    pass


class Result:
    """What a subcommand hands back: report, optional artifact, verdict."""

    def __init__(self, report: dict, ok: bool = True, artifact: dict | None = None, summary: str = ""):
        self.report = report
        self.ok = ok
        self.artifact = artifact
        self.summary = summary


def dumps(obj, canonical: bool) -> str:
    if canonical:
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(" ", "").split(",") if t]


def _load_json(path: str) -> dict:
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _load_poly_or_circuit(path: str) -> MultilinearPoly:
    obj = _load_json(path)
    if "gates" in obj:
        return Circuit.from_json(obj).expand()
    return MultilinearPoly.from_json(obj)


def _field(args, default: int | str) -> FieldCtx:
    return FieldCtx.parse(str(args.field if args.field is not None else default))


# ---------------------------------------------------------------------------
# circuit commands


def cmd_validate(args) -> Result:
    obj = _load_json(args.input)
    try:
        c = Circuit.from_json(obj)
    except CircuitError as e:
        errs = [{"gate": g, "message": m} for g, m in e.errors]
        return Result({"valid": False, "errors": errs}, ok=False, summary=f"invalid: {len(errs)} error(s)")
    errs = [{"gate": g, "message": m} for g, m in c.validate()]
    if errs:
        return Result({"valid": False, "errors": errs}, ok=False, summary=f"invalid: {len(errs)} error(s)")
    sm, bad = c.is_syntactically_multilinear()
    rep = {"valid": True, "errors": [], "n": c.n, "size": c.size(), "outputs": list(c.outputs),
           "syntactically_multilinear": sm, "violating_gate": bad}
    try:
        rep["semantically_multilinear"] = c.is_semantically_multilinear()
    except ResourceError as e:
        rep["semantically_multilinear"] = None
        rep["semantic_check_skipped"] = str(e)
    return Result(rep, summary=f"valid; syntactically multilinear: {sm}")


def cmd_expand(args) -> Result:
    c = read_circuit(args.input)
    out = args.output_gate if args.output_gate is not None else None
    f = c.expand(out)
    return Result({"n": c.n, "output": out if out is not None else c.outputs[0], "degree": f.degree(),
                   "terms": len(f.terms)}, artifact=f.to_json(), summary=f"{len(f.terms)} terms, degree {f.degree()}")


def cmd_eval(args) -> Result:
    c = read_circuit(args.input)
    point = [t for t in args.point.replace(" ", "").split(",") if t]
    vals = c.evaluate(point)
    return Result({"point": point, "outputs": list(c.outputs), "values": [c.ctx.to_str(v) for v in vals]},
                  summary=" ".join(c.ctx.to_str(v) for v in vals))


def cmd_derive(args) -> Result:
    c = read_circuit(args.input)
    dc = bs_transform(c)
    rep = dc.report()
    return Result(rep, artifact=dc.base.to_json(),
                  summary=f"derivative circuit size {rep['size']} (source {rep['origin_size']})")


def cmd_leveled(args) -> Result:
    c = read_circuit(args.input)
    lev = leveled.leveled_sets(c, args.k, args.root)
    return Result(lev.to_json(), summary=f"|L| = {len(lev.lower)}, |U| = {len(lev.upper)}")


def cmd_decompose(args) -> Result:
    c = read_circuit(args.input)
    dec = leveled.decompose(c, args.k, args.tau)
    rep = {"k": dec.k, "tau": dec.tau, "lower": dec.gates, "residual_degree": dec.residual_degree,
           "degree_bound": dec.degree_bound, "checks": dec.checks}
    ok = all(v for v in dec.checks.values())
    return Result(rep, ok=ok, artifact=dec.to_json(), summary=f"{len(dec.gates)} pairs, checks {dec.checks}")


def cmd_pdm_rank(args) -> Result:
    f = _load_poly_or_circuit(args.input)
    n = f.n
    if args.all:
        if n % 2:
            raise UsageError("--all needs an even number of variables")
        rows = []
        for y in setfam.balanced_masks(n):
            rows.append({"Y": setfam._elements(y), "rank": rank_yz(f, Partition(n, y))})
        return Result({"n": n, "partitions": rows, "max_rank": max(r["rank"] for r in rows),
                       "min_rank": min(r["rank"] for r in rows)},
                      summary=f"{len(rows)} partitions, ranks {min(r['rank'] for r in rows)}..{max(r['rank'] for r in rows)}")
    if args.y is None:
        raise UsageError("give --y or --all")
    part = Partition(n, mask_of(_ints(args.y)))
    m = build_pdm(f, part).matrix
    r = rank_yz(f, part)
    return Result({"n": n, "Y": _ints(args.y), "rows": m.rows, "cols": m.cols, "rank": r}, summary=f"rank {r}")


# ---------------------------------------------------------------------------
# set families


def cmd_setfam_construct(args) -> Result:
    if args.kind == "galvin":
        if args.gn is None:
            raise UsageError("--gn is required for the galvin construction")
        fam = setfam.galvin_interval_family(args.gn)
    else:
        if args.n is None or args.tau is None:
            raise UsageError("--n and --tau are required for the interval construction")
        fam = setfam.interval_tau_family(args.n, args.tau)
    return Result({"kind": args.kind, "n": fam.n, "m": len(fam)}, artifact=fam.to_json(),
                  summary=f"{len(fam)} sets over [{fam.n}]")


def cmd_setfam_covers(args) -> Result:
    fam = setfam.read_family(args.input)
    ok, witness = setfam.covers(fam, args.tau, strict=args.strict, threads=args.threads)
    return Result({"n": fam.n, "m": len(fam), "tau": args.tau, "strict": args.strict, "covers": ok,
                   "witness": witness.elements if witness else None},
                  ok=ok, summary="covers" if ok else f"does not cover; witness Y = {witness.elements}")


def cmd_setfam_search(args) -> Result:
    if args.n is None or args.tau is None:
        raise UsageError("--n and --tau are required")
    lo = args.size_lo if args.size_lo is not None else 2 * args.tau
    hi = args.size_hi if args.size_hi is not None else args.n - 2 * args.tau
    res = setfam.min_family_search(args.n, args.tau, lo, hi, exact_balance=args.exact, strict=args.strict)
    rep = {"n": args.n, "tau": args.tau, "size_lo": lo, "size_hi": hi, "exact_balance": args.exact,
           "strict": args.strict, "m": res.m, "family": res.family.as_lists() if res.family else None,
           "candidates": res.candidates, "partitions": res.partitions,
           "counting_lower_bound": setfam.counting_lower_bound(args.n, args.tau, lo, hi, args.exact, args.strict)}
    if not res.feasible:
        rep["message"] = "no family of any size"
    return Result(rep, ok=res.feasible, summary=f"m = {res.m}" if res.feasible else "no family of any size")


def cmd_setfam_unbalance(args) -> Result:
    fam = setfam.read_family(args.input)
    found = setfam.find_unbalancing_partition(fam, args.tau, args.mode, args.budget, args.seed, args.threads)
    rep = {"n": fam.n, "m": len(fam), "tau": args.tau, "mode": args.mode, "found": bool(found),
           "Y": found.elements if found else None, "tried": None if found else found.tried}
    return Result(rep, ok=bool(found), summary=f"Y = {found.elements}" if found else f"not found after {found.tried}")


# ---------------------------------------------------------------------------
# polynomial method / full rank / pipeline


def cmd_hegedus(args) -> Result:
    res = polymethod.hegedus_verify(args.p, allow_long=args.allow_long, seed=args.seed)
    rep = res.to_json()
    rep["verdict"] = "pass" if res.passed else "fail"
    return Result(rep, ok=res.passed, summary=rep["verdict"])


def cmd_witness(args) -> Result:
    fam = setfam.read_family(args.input)
    const = polymethod.preset(args.preset)
    rep = polymethod.witness_pipeline(fam, args.tau, args.mode, args.seed, const, args.retries,
                                      t_range=args.t_range, threads=args.threads)
    rep["preset"] = args.preset
    return Result(rep, summary=f"steps: {rep['verified']}")


def cmd_fullrank_build(args) -> Result:
    fp = fullrank.build(args.n)
    if args.omega is None:
        return Result({"n": fp.n, "terms": len(fp.terms), "form": "structural"}, artifact=fp.to_json(),
                      summary=f"{len(fp.terms)} terms")
    ctx = _field(args, fullrank.DEFAULT_PRIME)
    f = fullrank.specialize(fp, _ints(args.omega), ctx)
    return Result({"n": fp.n, "terms": len(f.terms), "form": "specialized", "omega": _ints(args.omega)},
                  artifact=f.to_json(), summary=f"specialized: {len(f.terms)} monomials")


def cmd_fullrank_verify(args) -> Result:
    p = int(args.field) if args.field not in (None, "rational", "q") else fullrank.DEFAULT_PRIME
    rep = fullrank.verify_full_rank(fullrank.build(args.n), args.method, p, args.seed, args.threads)
    return Result(rep, ok=rep["passed"], summary=f"{rep['partitions'] - len(rep['failures'])}/{rep['partitions']} partitions full rank")


def cmd_pipeline(args) -> Result:
    c = read_circuit(args.input)
    k = args.k if args.k is not None else 100 * args.tau
    rep = pipeline.pipeline_lowerbound(c, args.tau, k, args.seed, args.threads)
    return Result(rep, ok=not rep["self_check"], summary=f"stages: {sorted(rep['stages'])}")


# ---------------------------------------------------------------------------
# parser


RANDOMIZED = {"setfam unbalance", "polymethod witness", "fullrank verify", "pipeline", "polymethod hegedus"}


def _global_flags(parser: argparse.ArgumentParser, top: bool):
    d = None if top else argparse.SUPPRESS
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d, help="seed for every random stream")
    g.add_argument("--threads", type=int, default=d, help="worker threads (default: available CPUs)")
    g.add_argument("--field", default=d, help="prime p or 'rational' where a field is chosen by the command")
    g.add_argument("-o", "--output", default=d, help="write the artifact here")
    g.add_argument("--canonical", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="compact JSON with sorted keys")
    g.add_argument("--require-seed", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="refuse randomized commands without --seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlcirc", description="Multilinear circuit and set-balancing toolkit.")
    _global_flags(ap, top=True)
    sub = ap.add_subparsers(dest="command", required=True)

    def leaf(parent, name: str, fn: Callable, help_: str):
        p = parent.add_parser(name, help=help_)
        _global_flags(p, top=False)
        p.set_defaults(fn=fn)
        return p

    p = leaf(sub, "validate", cmd_validate, "check circuit structure and multilinearity")
    p.add_argument("-i", "--input", required=True)
    p = leaf(sub, "expand", cmd_expand, "expand a circuit output into a multilinear polynomial")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--output-gate", type=int)
    p = leaf(sub, "eval", cmd_eval, "evaluate all outputs at a point")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--point", required=True, help="comma-separated field elements")
    p = leaf(sub, "derive", cmd_derive, "circuit for all first partial derivatives")
    p.add_argument("-i", "--input", required=True)
    p = leaf(sub, "leveled", cmd_leveled, "lower/upper leveled gates")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--root", type=int)
    p = leaf(sub, "decompose", cmd_decompose, "split the output along the lower leveled gates")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tau", type=int, default=1)
    p = leaf(sub, "pdm-rank", cmd_pdm_rank, "rank of the partial derivative matrix")
    p.add_argument("-i", "--input", required=True, help="polynomial or circuit JSON")
    p.add_argument("--y", help="comma-separated Y (1-based)")
    p.add_argument("--all", action="store_true", help="every balanced partition")

    sf = sub.add_parser("setfam", help="set families and balanced partitions").add_subparsers(dest="sub", required=True)
    p = leaf(sf, "construct", cmd_setfam_construct, "interval constructions")
    p.add_argument("--kind", choices=["galvin", "interval"], default="interval")
    p.add_argument("--gn", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--tau", type=int)
    p = leaf(sf, "covers", cmd_setfam_covers, "does every balanced partition balance some set")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--strict", dest="strict", action="store_true", default=True)
    p.add_argument("--non-strict", dest="strict", action="store_false")
    p = leaf(sf, "search", cmd_setfam_search, "minimum covering family (n <= 12)")
    p.add_argument("--n", type=int)
    p.add_argument("--tau", type=int)
    p.add_argument("--size-lo", type=int)
    p.add_argument("--size-hi", type=int)
    p.add_argument("--exact", action="store_true", help="require exact halving")
    p.add_argument("--strict", dest="strict", action="store_true", default=True)
    p.add_argument("--non-strict", dest="strict", action="store_false")
    p = leaf(sf, "unbalance", cmd_setfam_unbalance, "partition unbalancing every set")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--mode", choices=["exhaustive", "randomized"], default="exhaustive")
    p.add_argument("--budget", type=int, default=100_000)

    pm = sub.add_parser("polymethod", help="polynomial method").add_subparsers(dest="sub", required=True)
    p = leaf(pm, "hegedus", cmd_hegedus, "vanishing check on the middle layer")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--allow-long", action="store_true", help="permit p = 5")
    p = leaf(pm, "witness", cmd_witness, "run the unbalancing pipeline on a family")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--mode", choices=["special", "general"], default="general")
    p.add_argument("--preset", choices=sorted(polymethod.PRESETS), default="tiny")
    p.add_argument("--retries", type=int, default=8)
    p.add_argument("--t-range", choices=["statement", "proof"], default="statement")

    fr = sub.add_parser("fullrank", help="the full-rank polynomial").add_subparsers(dest="sub", required=True)
    p = leaf(fr, "build", cmd_fullrank_build, "structural or specialized form")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--omega", help="comma-separated values for w_1..w_n")
    p = leaf(fr, "verify", cmd_fullrank_verify, "rank under every balanced partition")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["indicator", "random"], default="indicator")

    p = leaf(sub, "pipeline", cmd_pipeline, "lower-bound argument on a circuit")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--k", type=int)
    return ap


def _command_name(args) -> str:
    return f"{args.command} {args.sub}" if getattr(args, "sub", None) else args.command


def _randomized(args) -> bool:
    name = _command_name(args)
    if name == "setfam unbalance":
        return args.mode == "randomized"
    if name == "fullrank verify":
        return args.method == "random"
    if name == "polymethod hegedus":
        return args.allow_long
    return name in RANDOMIZED


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    name = _command_name(args)
    if args.require_seed and args.seed is None and _randomized(args):
        ap.print_usage(sys.stderr)
        print(f"mlcirc: error: {name} is randomized and --require-seed is set; pass --seed", file=sys.stderr)
        return EXIT_USAGE
    args.seed = 0 if args.seed is None else args.seed
    args.threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if args.threads < 1:
        print("mlcirc: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE

    header = {"schema_version": SCHEMA_VERSION, "command": name}
    try:
        res = args.fn(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"mlcirc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as e:
        sys.stdout.write(dumps({**header, "error": "resource", "message": str(e)}, args.canonical))
        print(f"resource guard: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (MlcircError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        diag = {**header, "error": type(e).__name__, "message": str(e)}
        if isinstance(e, CircuitError):
            diag["errors"] = [{"gate": g, "message": m} for g, m in e.errors]
        sys.stdout.write(dumps(diag, args.canonical))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL

    report = {**header, **res.report}
    if res.artifact is not None:
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(dumps(res.artifact, args.canonical))
            report["artifact"] = args.output
        else:
            report["artifact"] = res.artifact
    sys.stdout.write(dumps(report, args.canonical))
    if res.summary:
        print(res.summary, file=sys.stderr)
    return EXIT_OK if res.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
