"""Command line entry point: ``ksconsume {run,sweep,check-exponents,
compare-formulations,verify}``.

Exit codes: 0 all monitors pass, 2 a monitor failed, 3 blow-up suspected,
4 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import analysis, harness
from .config import ConfigError, load_run_config, load_sweep_config, preset_config
from .harness import EXIT_CONFIG, EXIT_MONITOR, EXIT_OK

logger = logging.getLogger("ksconsume")


def _config(args):
    if args.config is None and getattr(args, "preset", None) is None:
        raise ConfigError("give --config PATH or --preset NAME")
    if args.config is not None:
        return load_run_config(args.config, seed=args.seed)
    return preset_config(args.preset, seed=args.seed)


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_run(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    results = []
    for form in cfg.formulations():
        res = harness.simulate(cfg, form)
        paths = harness.write_run_outputs(out, cfg, res)
        results.append(res)
        _say(args, f"[{cfg.name}/{form}] status={res.trajectory.status} "
                   f"t={res.trajectory.snapshots[-1].t:g} hash={cfg.config_hash()}",
             *res.report.summary_lines(), *(f"  wrote {p}" for p in paths))
    return harness.combined_exit(results)


def cmd_sweep(args) -> int:
    if args.config is None:
        raise ConfigError("sweep needs --config PATH with a [sweep] section")
    sc = load_sweep_config(args.config, seed=args.seed)
    rows = harness.sweep(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{sc.base.name}_sweep.csv"
    harness.write_table_csv(path, rows, sc.config_hash())
    for r in rows:
        _say(args, f"chi={r['chi']:<6g} mu={r['mu']:<6g} kappa={r['kappa']:<6g} "
                   f"{r['verdict']:18s} passed={r['monitors_passed']} "
                   f"failed={r['monitors_failed']} u_inf={r['final_u_inf']:.4g}")
    _say(args, f"wrote {path}")
    proven = [r for r in rows if r["in_proven_region"]]
    return EXIT_OK if all(r["verdict"] == "pass" for r in proven) else EXIT_MONITOR


def check_exponents_report(chi: float, mu: float, n: int, p0: float | None = None) -> list[str]:
    gate = analysis.theorem_gate(chi, mu, n)
    lines = [f"chi={chi:g} mu={mu:g} n={n}",
             f"  chi < sqrt(2/n)        : {gate.chi_ok}",
             f"  mu > (n-2)/(2n)        : {gate.mu_weak}",
             f"  mu > (n-2)/n           : {gate.mu_strict}",
             f"  {gate.note()}"]
    pair = analysis.admissible_pair(chi, mu, n)
    if pair is None:
        lines.append("  admissible (p, r)      : none")
    else:
        p, r = pair
        win = analysis.exponent_window(p, chi, mu)
        lines.append(f"  admissible (p, r)      : ({p:.12g}, {r:.12g})")
        lines.append(f"  r window               : ({win.r_minus:.12g}, {win.r_high:.12g})")
    start = p0 if p0 is not None else (pair[0] if pair else None)
    if start is None:
        lines.append("  bootstrap              : no starting exponent")
    elif not start > n / 2:
        lines.append(f"  bootstrap              : p0={start:g} must exceed n/2")
    else:
        trace = analysis.bootstrap_sequence(start, n)
        vals = ", ".join("inf" if math.isinf(v) else f"{v:.6g}" for v in trace.values)
        lines.append(f"  bootstrap ({len(trace) - 1} steps)  : {vals}")
        if "exceptional" in trace.rules:
            lines.append("  (exceptional rule used)")
    return lines


def cmd_check_exponents(args) -> int:
    print("\n".join(check_exponents_report(args.chi, args.mu, args.n, args.p0)))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    levels = harness.compare_formulations(cfg, levels=args.levels)
    rows = [{"level": l.level, "cells": "x".join(map(str, l.cells)), "h": l.h, "dt": l.dt,
             "steps": l.steps, "v_discrepancy": l.discrepancy,
             "order": "" if l.order is None else l.order} for l in levels]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}_compare.csv"
    harness.write_table_csv(path, rows, cfg.config_hash())
    _say(args, f"{'level':>5} {'cells':>8} {'dt':>11} {'sup|v_uv - v_uw|':>18} {'order':>7}")
    for l in levels:
        order = "" if l.order is None else f"{l.order:.3f}"
        _say(args, f"{l.level:5d} {'x'.join(map(str, l.cells)):>8} {l.dt:11.4e} "
                   f"{l.discrepancy:18.6e} {order:>7}")
    _say(args, f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for form in cfg.formulations():
        res = harness.simulate(cfg, form)
        reports = harness.verify_barriers(res.trajectory, tol=args.tol)
        payload = {"config_hash": cfg.config_hash(), "formulation": form,
                   "orderings": [r.as_dict() for r in reports]}
        path = out / f"{cfg.name}_{form}_barriers.json"
        harness.write_json(path, payload)
        for r in reports:
            _say(args, f"{r.verdict:17s} {r.name:18s} min gap {r.min_gap:+.3e} "
                       f"at t={r.min_gap_time:g}")
        _say(args, f"wrote {path}")
        ok = ok and all(r.passed for r in reports)
    return EXIT_OK if ok else EXIT_MONITOR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ksconsume", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--seed", type=int, default=None, help="seed for perturbed data")
    common.add_argument("--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate and monitor")
    p.add_argument("--preset", help="use a named preset instead of --config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-exponents", parents=[common], help="exponent calculus report")
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p0", type=float, default=None)
    p.set_defaults(func=cmd_check_exponents)

    p = sub.add_parser("compare-formulations", parents=[common],
                       help="uv against uw under refinement")
    p.add_argument("--preset")
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", parents=[common], help="canonical barrier orderings")
    p.add_argument("--preset")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
