"""Command-line front end: ``privex <command> [options]``.

Exit codes: 0 success, 2 input error, 3 infeasible or out-of-range request
(including numerical failures), 4 verification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import dependence as dep
from . import filters as flt
from . import rate_privacy_discrete as rpd
from . import rate_privacy_gaussian as rpg
from . import verify as ver
from .errors import InputError, NumericalError, PrivexError, RangeError
from .prob_core import (
    Channel,
    conditional_entropy,
    entropy,
    mutual_information,
)
from .serialization import csv_table, dumps, fmt, load_joint
from .structure import detect_biso, detect_erasure

EXIT_OK, EXIT_INPUT, EXIT_RANGE, EXIT_VERIFY = 0, 2, 3, 4

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_I_EXPR = re.compile(rf"^(?:({_NUM})\*?)?I(?:/({_NUM}))?$")


# ---------------------------------------------------------------- parsing helpers

def parse_value(token: str, info: float | None = None) -> float:
    """Parse a number or an expression in ``I`` such as ``I``, ``I/2``, ``0.5I``."""
    token = token.strip()
    m = _I_EXPR.match(token)
    if m:
        if info is None:
            raise InputError(f"'{token}': the keyword I is not available here")
        scale = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        if div == 0:
            raise InputError(f"'{token}': division by zero")
        return scale * info / div
    try:
        return float(token)
    except ValueError:
        raise InputError(f"cannot parse '{token}' as a number") from None


def parse_grid(spec: str, info: float | None = None) -> list:
    """``a:b:n`` is ``n`` equally spaced points from ``a`` to ``b`` inclusive."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise InputError(f"grid '{spec}' must have the form a:b:n")
    a, b = parse_value(parts[0], info), parse_value(parts[1], info)
    try:
        n = int(parts[2])
    except ValueError:
        raise InputError(f"grid '{spec}': n must be an integer") from None
    if n < 1:
        raise InputError(f"grid '{spec}': n must be >= 1")
    if n == 1:
        return [a]
    pts = np.linspace(a, b, n).tolist()
    pts[-1] = b  # exact endpoint, e.g. I itself
    return pts


def parse_int_list(spec: str) -> list:
    try:
        return [int(t) for t in spec.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"cannot parse '{spec}' as a comma-separated list of integers") from None


def resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get("PRIVEX_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"PRIVEX_SEED='{env}' is not an integer") from None


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- output

class Run:
    """Collects the manifest for one command invocation."""

    def __init__(self, args):
        self.args = args
        self.t0 = time.perf_counter()
        self.extra = {}

    def manifest(self, out_bytes: bytes) -> dict:
        a = self.args
        config = {k: v for k, v in vars(a).items()
                  if k not in ("func", "out", "input", "command") and v is not None}
        if "seed" in vars(a):
            config["seed"] = resolve_seed(a.seed)
        config["feasibility_tol"] = rpd.FEAS_TOL
        man = {"command": a.command,
               "input": a.input if getattr(a, "input", None) else None,
               "input_sha256": sha256_file(a.input) if getattr(a, "input", None) else None,
               "config": config,
               "version": __version__,
               "output_sha256": hashlib.sha256(out_bytes).hexdigest()}
        man.update(self.extra)
        man["wall_clock_s"] = round(time.perf_counter() - self.t0, 3)
        return man

    def emit(self, text: str):
        data = text.encode()
        if self.args.out:
            out = Path(self.args.out)
            out.write_bytes(data)
            side = out.with_name(out.name + ".manifest.json")
            side.write_text(json.dumps(self.manifest(data), indent=2) + "\n")
        else:
            sys.stdout.write(text)
            sys.stdout.flush()


def _solver_config(args) -> rpd.SolverConfig:
    threads = args.threads if getattr(args, "threads", None) else (os.cpu_count() or 1)
    return rpd.SolverConfig(restarts=args.restarts, master_seed=resolve_seed(args.seed),
                            threads=max(1, threads))


def _records_to_csv(records: list) -> str:
    header = list(records[0].keys()) if records else []
    rows = [[_cell(r[k]) for k in header] for r in records]
    return csv_table(header, rows)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float, np.floating)):
        return float(v)
    return str(v)


# ---------------------------------------------------------------- commands

def analyze_report(joint, config: rpd.SolverConfig | None = None) -> dict:
    """All summary quantities of a joint distribution."""
    info = mutual_information(joint)
    rep = {"x_labels": list(joint.x_labels), "y_labels": list(joint.y_labels),
           "stripped_x": list(joint.stripped_x), "stripped_y": list(joint.stripped_y),
           "h_x": entropy(joint.px), "h_y": entropy(joint.py),
           "h_y_given_x": conditional_entropy(joint), "i_xy": info,
           "rho_m": None, "poincare": None, "weakly_independent": None, "rank": None,
           "g0": None, "biso": None, "erasure_delta": None,
           "slope_bound": None, "slope_argmax": None, "linearity": None,
           "closed_form": None, "notes": []}
    if info <= 0:
        rep.update(rho_m=0.0, poincare=1.0)
        rep["notes"].append("IndependentSources: I(X;Y) = 0, so every filter is private "
                            "and g_eps = H(Y) for all eps >= 0")
        return rep
    rho = dep.maximal_correlation(joint)
    wi = dep.weak_independence(joint)
    rep.update(rho_m=rho, poincare=dep.poincare_constant(joint),
               weakly_independent=bool(wi), rank=int(wi.rank))
    rep["g0"] = rpd.g0(joint, config)[0]
    if wi:
        rep["notes"].append("X is weakly independent of Y: g0 > 0 (perfect privacy "
                            "with positive utility)")
    fwd = Channel(joint.pxy / joint.px[:, None], joint.x_labels, joint.y_labels)
    rev = Channel((joint.pxy / joint.py[None, :]).T, joint.y_labels, joint.x_labels)
    if joint.shape[1] == 2:
        rep["biso"] = bool(detect_biso(rev))
    rep["erasure_delta"] = detect_erasure(fwd)
    cf = rpd.closed_form(joint, info / 2)
    rep["closed_form"] = cf.provenance if cf else None
    if not wi:
        bound, label = rpd.slope_bound_at_zero(joint)
        rep["slope_bound"], rep["slope_argmax"] = bound, label
        rep["linearity"] = rpd.linearity_test(joint).verdict
    else:
        rep["notes"].append("slope at zero is infinite; linearity test skipped")
    return rep


def cmd_analyze(args, run: Run):
    joint = load_joint(args.input)
    rep = analyze_report(joint, rpd.SolverConfig(master_seed=resolve_seed(args.seed)))
    if args.format == "json":
        run.emit(dumps(rep))
    else:
        rows = [(k, _fmt_any(v)) for k, v in rep.items()]
        run.emit(csv_table(["quantity", "value"], rows))


def _fmt_any(v):
    if isinstance(v, list):
        return ";".join(str(t) for t in v)
    if isinstance(v, bool) or v is None:
        return _cell(v)
    if isinstance(v, (int, float)):
        return fmt(v)
    return str(v)


def cmd_curve(args, run: Run):
    joint = load_joint(args.input)
    info = mutual_information(joint)
    grid = parse_grid(args.grid, info)
    pts = rpd.curve_g(joint, grid, _solver_config(args))
    if args.format == "json":
        run.emit(dumps([{k: v for k, v in p.to_dict().items() if k != "filter"} for p in pts]))
    else:
        run.emit(rpd.curve_to_csv(pts))


def _gaussian_grid(args, pair):
    if (args.eps is None) == (args.grid is None):
        raise InputError("give exactly one of --eps and --grid")
    if args.eps is not None:
        return [parse_value(args.eps, pair.mutual_information)]
    return parse_grid(args.grid, pair.mutual_information)


def cmd_gaussian(args, run: Run):
    pair = rpg.GaussianPair(args.rho2, args.var_y)
    grid = _gaussian_grid(args, pair)
    M = None
    if args.M is not None:
        ms = parse_int_list(args.M)
        if len(ms) != 1:
            raise InputError("gaussian takes a single --M")
        M = ms[0]
    rows = rpg.comparison_rows(pair, grid, M)
    if args.format == "json":
        run.emit(dumps([{"epsilon": e, "g_closed": g, "g_hat_closed": gh, "g_eps_M": gm}
                        for e, g, gh, gm in rows]))
    else:
        run.emit(rpg.comparison_to_csv(pair, grid, M))


def cmd_quantized(args, run: Run):
    pair = rpg.GaussianPair(args.rho2, args.var_y)
    if args.eps is None:
        raise InputError("--eps is required")
    eps = parse_value(args.eps, pair.mutual_information)
    ms = parse_int_list(args.M or "2,4,6,8")
    if args.format == "json":
        rep = rpg.convergence_report(pair, eps, ms)
        run.emit(dumps({"epsilon": eps, "g_eps": rep.g_eps, "gamma_ref": rep.gamma_ref,
                        "entropy_nonincreasing": rep.entropy_nonincreasing,
                        "gaps_nonincreasing": rep.gaps_nonincreasing,
                        "rows": [asdict(r) for r in rep.rows]}))
    else:
        run.emit(rpg.sweep_to_csv(rpg.sweep_table(pair, eps, ms)))


def filter_document(joint, point: rpd.RatePrivacyPoint) -> dict:
    """Filter certificate with full-precision rows and its audit."""
    audit = flt.audit_filter(joint, point.filter)
    return {"epsilon": point.epsilon, "measure": point.measure,
            "lower": point.lower, "value": point.value, "upper": point.upper,
            "audit": audit.to_dict(), "filter": point.filter.to_dict()}


def cmd_filter(args, run: Run):
    joint = load_joint(args.input)
    info = mutual_information(joint)
    eps = parse_value(args.eps, info)
    cfg = _solver_config(args)
    if args.measure == "mc":
        point = rpd.solve_g_hat(joint, eps, cfg)
    else:
        point = rpd.solve_g(joint, eps, cfg)
    doc = filter_document(joint, point)
    run.extra["leakage"] = doc["audit"]
    # full precision so that a reloaded filter audits to the same numbers
    run.emit(json.dumps(doc, indent=2) + "\n")


def _scalar_output(args, run: Run, key: str, arg_value: float, result: float, name: str):
    if args.format == "json":
        run.emit(dumps({key: arg_value, name: result}))
    else:
        run.emit(csv_table([key, name], [(arg_value, result)]))


def cmd_funnel(args, run: Run):
    joint = load_joint(args.input)
    rate = parse_value(args.rate, entropy(joint.py))
    t = rpd.funnel_dual(joint, rate, _solver_config(args))
    _scalar_output(args, run, "rate", rate, t, "funnel_upper")


def cmd_dilution(args, run: Run):
    joint = load_joint(args.input)
    da = parse_value(args.delta_a, entropy(joint.py))
    t = rpd.dilution_outer(joint, da, _solver_config(args))
    _scalar_output(args, run, "delta_a", da, t, "delta_m_min")


def cmd_verify(args, run: Run) -> int:
    suites = args.suite or list(ver.SUITES)
    unknown = [s for s in suites if s not in ver.SUITES]
    if unknown:
        raise InputError(f"unknown suite(s) {unknown}; choose from {list(ver.SUITES)}")
    results = ver.run(suites, seed=resolve_seed(args.seed), quick=args.quick)
    lines = [f"{'PASS' if c.passed else 'FAIL'} [{c.suite}] {c.name}: {c.detail}"
             for c in results]
    n_fail = sum(not c.passed for c in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    run.emit("\n".join(lines) + "\n")
    return EXIT_VERIFY if n_fail else EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privex", description="Rate-privacy toolkit")
    p.add_argument("--version", action="version", version=f"privex {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="csv"):
        sp.add_argument("--out", help="output file (default stdout); a manifest "
                                      "<out>.manifest.json is written next to it")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed (default $PRIVEX_SEED or 0)")

    def solver(sp):
        sp.add_argument("--restarts", type=int, default=rpd.SolverConfig.restarts)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; output does not depend on it)")

    sp = sub.add_parser("analyze", help="summary quantities of a joint distribution")
    sp.add_argument("--input", required=True)
    common(sp, "json")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("curve", help="g_eps on a grid of eps values")
    sp.add_argument("--input", required=True)
    sp.add_argument("--grid", default="0:I:9", help="a:b:n, the keyword I is I(X;Y)")
    common(sp)
    solver(sp)
    sp.set_defaults(func=cmd_curve)

    for name, helptext in (("gaussian", "Gaussian closed forms"),
                           ("quantized", "quantized Gaussian filters")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--rho2", type=float, required=True)
        sp.add_argument("--var-y", type=float, default=1.0)
        sp.add_argument("--eps")
        sp.add_argument("--M", help="quantizer bits (comma list for quantized)")
        if name == "gaussian":
            sp.add_argument("--grid")
            sp.set_defaults(func=cmd_gaussian)
        else:
            sp.set_defaults(func=cmd_quantized)
        common(sp)

    sp = sub.add_parser("filter", help="certified optimal filter at one eps")
    sp.add_argument("--input", required=True)
    sp.add_argument("--eps", required=True)
    sp.add_argument("--measure", choices=("mi", "mc"), default="mi",
                    help="mi: I(X;Z) <= eps; mc: maximal correlation squared <= eps")
    common(sp, "json")
    solver(sp)
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("funnel", help="upper bound on the privacy funnel at rate R")
    sp.add_argument("--input", required=True)
    sp.add_argument("--rate", "--R", dest="rate", required=True)
    common(sp)
    solver(sp)
    sp.set_defaults(func=cmd_funnel)

    sp = sub.add_parser("dilution", help="smallest masking for an amplification target")
    sp.add_argument("--input", required=True)
    sp.add_argument("--delta-a", required=True)
    common(sp)
    solver(sp)
    sp.set_defaults(func=cmd_dilution)

    sp = sub.add_parser("verify", help="run the randomized invariant suites")
    sp.add_argument("--suite", action="append", help=f"one of {list(ver.SUITES)}; repeatable")
    sp.add_argument("--quick", action="store_true", help="fewer random instances")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "format", None) == "csv" and args.command == "filter":
        args.format = "json"  # filters are always JSON documents
    run = Run(args)
    try:
        code = args.func(args, run)
    except InputError as exc:
        print(f"privex: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RangeError, NumericalError) as exc:
        print(f"privex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except PrivexError as exc:
        print(f"privex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RANGE
    return code or EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
