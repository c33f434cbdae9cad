"""Command-line interface: run, sweep, steady, verify, extract."""

import argparse
import json
import sys

from .config import build_problem, build_stepper, load_config
from .sweeplab import diagonal_extraction, load_report, run_single, run_sweep, verify


def _cmd_run(args):
    cfg = load_config(args.config)
    result = run_single(cfg, kappa=args.kappa, outdir=args.out or cfg["output.dir"])
    rec = result.record()
    print(json.dumps(rec, indent=2, default=float))
    return 0


def _cmd_sweep(args):
    cfg = load_config(args.config)
    report = run_sweep(cfg, outdir=args.out or cfg["output.dir"])
    print(json.dumps(report.checks, indent=2, default=float))
    return 0


def _cmd_steady(args):
    from .config import build_initial_data
    from .steady import limit_certificate, solve_stationary

    cfg = load_config(args.config)
    prob = build_problem(cfg, kappa=args.kappa)
    try:
        init = build_initial_data(cfg, prob.grid, prob.sched_u, prob.sched_v)
        guess_u, guess_v = init.u0, init.v0
    except Exception:
        guess_u = prob.sched_u.terminal_extension()
        guess_v = prob.sched_v.terminal_extension()
    pair = solve_stationary(prob, guess_u, guess_v, tol=float(cfg["steady.tol"]))
    cert = limit_certificate(pair, prob)
    print(json.dumps({
        "kappa": prob.kappa,
        "residual_u": pair.residual_u,
        "residual_v": pair.residual_v,
        "method": pair.method,
        "iterations": pair.iterations,
        "overlap": cert.overlap,
        "kappa_overlap": cert.kappa_overlap,
        "vi_u": cert.vi_violation_u,
        "vi_v": cert.vi_violation_v,
        "holder_ratio": cert.holder_ratio,
    }, indent=2, default=float))
    return 0


def _cmd_verify(args):
    code, results = verify([args.suite] if args.suite else None)
    for r in results:
        mark = "PASS" if r["ok"] else "FAIL"
        detail = f"  ({r['detail']})" if r["detail"] else ""
        print(f"[{mark}] {r['name']}{detail}")
    print(json.dumps({"failed": sum(not r["ok"] for r in results),
                      "total": len(results)}))
    return code


def _cmd_extract(args):
    report = load_report(args.report)
    seq = diagonal_extraction(report, args.depth)
    for entry in seq:
        print(json.dumps(entry, default=float))
    if not seq or seq[-1]["m"] < args.depth:
        reached = seq[-1]["m"] if seq else 0
        print(f"requested depth {args.depth} unreachable; deepest m = {reached}",
              file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="segrelab",
        description="Competition-diffusion laboratory: trajectories, kappa "
                    "sweeps, stationary solves, and segregation diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single trajectory + stationary certificate")
    p.add_argument("--config", required=True)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="full kappa sweep with segregation report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("steady", help="stationary solve at one kappa")
    p.add_argument("--config", required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.set_defaults(fn=_cmd_steady)

    p = sub.add_parser("verify", help="module invariant suites")
    p.add_argument("--suite", default=None)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("extract", help="diagonal (kappa_m, t_m) extraction")
    p.add_argument("--report", required=True, help="sweep output directory")
    p.add_argument("--depth", type=int, required=True)
    p.set_defaults(fn=_cmd_extract)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
