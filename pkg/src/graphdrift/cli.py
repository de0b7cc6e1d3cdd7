"""Command-line entry point: ``graphdrift <verb> [options]``.

Verbs
-----
calibrate        Monte-Carlo threshold table for given M and ARL0
run              run an experiment (preset name or JSON config)
bench            time the GED, assignment and calibration kernels
validate-theory  bound checks on random tiny graphs, written to bounds.json
report           aggregate an existing metrics.csv into a results table
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import GraphDriftError


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True,
                       help="experiment JSON file or preset name")
    p.add_argument("--seed", type=int, default=None, help="root random seed")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--out-dir", default="results", help="artifact directory")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")
    p.add_argument("--dataset-root", default=os.environ.get("GRAPHDRIFT_DATA"),
                   help="IAM data root (default $GRAPHDRIFT_DATA)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphdrift",
                                 description="Change detection in streams of attributed graphs")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("calibrate", help="compute a threshold table")
    _common(p, config=False)
    p.add_argument("--M", type=int, required=True, help="embedding dimension")
    p.add_argument("--arl0", type=int, default=200)
    p.add_argument("--sims", type=int, default=1_000_000)
    p.add_argument("--horizon", type=int, default=None)

    p = sub.add_parser("run", help="run an experiment")
    _common(p)
    p.add_argument("--calibration-sims", type=int, default=None)

    p = sub.add_parser("bench", help="time the core kernels")
    _common(p, config=False)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--sims", type=int, default=100_000)

    p = sub.add_parser("validate-theory", help="check the distance bounds")
    _common(p, config=False)
    p.add_argument("--pairs", type=int, default=500)

    p = sub.add_parser("report", help="summarise metrics.csv")
    _common(p, config=False)
    p.add_argument("--config", default=None, help="config used for the run (optional)")
    return ap


def cmd_calibrate(a) -> int:
    from .detector import calibrate_thresholds

    seed = a.seed or 0
    t0 = time.perf_counter()
    table = calibrate_thresholds(a.M, a.arl0, a.sims, a.horizon, seed, threads=a.threads)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"thresholds_{a.M}_{a.arl0}.json"
    path.write_text(table.to_json())
    print(f"h_1={table.h[0]:.4f} h_W={table.h[-1]:.4f} W={table.horizon} "
          f"({time.perf_counter() - t0:.1f}s) -> {path}")
    return 0


def cmd_run(a) -> int:
    from .experiment import Experiment, load_collections, load_spec

    spec = load_spec(a.config, seed=a.seed, replicates=a.replicates,
                     calibration_sims=a.calibration_sims)
    nominal, non_nominal = load_collections(spec, a.dataset_root)
    _, summary = Experiment(spec, nominal, non_nominal, a.threads).run(a.out_dir)
    print(format_table(summary))
    return 0


def cmd_bench(a) -> int:
    from .datasets import random_graph
    from .detector import calibrate_thresholds
    from .ged import bipartite_ged, exact_ged, lsap_solve

    rng = np.random.default_rng(a.seed or 0)
    pairs = [(random_graph(rng, (3, 6)), random_graph(rng, (3, 6))) for _ in range(a.pairs)]
    rows = []
    t0 = time.perf_counter()
    for g, f in pairs:
        bipartite_ged(g, f)
    rows.append(("bipartite_ged", a.pairs, time.perf_counter() - t0))
    t0 = time.perf_counter()
    for g, f in pairs[: max(1, a.pairs // 10)]:
        exact_ged(g, f)
    rows.append(("exact_ged", max(1, a.pairs // 10), time.perf_counter() - t0))
    mats = rng.uniform(size=(a.pairs, 50, 50))
    t0 = time.perf_counter()
    for C in mats:
        lsap_solve(C)
    rows.append(("lsap 50x50", a.pairs, time.perf_counter() - t0))
    t0 = time.perf_counter()
    calibrate_thresholds(4, 200, a.sims, horizon=1000, seed=0, threads=a.threads)
    rows.append((f"calibrate W=1000 {a.sims:.0e}", 1, time.perf_counter() - t0))
    print(f"{'kernel':<20}{'calls':>8}{'total s':>10}{'ms/call':>10}")
    for name, k, t in rows:
        print(f"{name:<20}{k:>8}{t:>10.3f}{1000 * t / k:>10.3f}")
    return 0


def cmd_validate_theory(a) -> int:
    from .theory import run_all_checks

    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = run_all_checks(a.pairs, a.seed or 0)
    (out / "bounds.json").write_text(json.dumps(reports, indent=2))
    bad = 0
    for name, rep in reports.items():
        v = rep.get("violations", rep.get("minimizer_violations", 0))
        print(f"{name:<40} violations={v}")
        bad += name != "lower_bound_bipartite" and v > 0
    return 1 if bad else 0


def cmd_report(a) -> int:
    from .experiment import load_spec, summarize
    from .stream_sim import samples_from_csv

    out = Path(a.out_dir)
    samples = samples_from_csv((out / "metrics.csv").read_text())
    if a.config:
        spec = load_spec(a.config)
        summary = summarize(spec, samples)
    else:
        summary = json.loads((out / "summary.json").read_text())
    print(format_table(summary))
    return 0


def _ci(x):
    return "-" if x is None else f"[{x[0]:.3f}, {x[1]:.3f}]"


def _num(x, fmt=".3f"):
    return "-" if x is None else format(x, fmt)


def format_table(summary: dict) -> str:
    e = summary["experiment"]
    m = summary.get("metrics", {})
    head = (f"{'id':<8}{'M':>4}{'n':>6}  {'DCR':>6} {'95CI':>17}  {'ARL0':>7} {'95CI':>20}  "
            f"{'DoD':>7} {'95CI':>20}  {'FA1000':>7} {'std':>6}")
    row = (f"{e['id']:<8}{e['M']:>4}{e['n']:>6}  {_num(m.get('dcr')):>6} {_ci(m.get('dcr_ci')):>17}  "
           f"{_num(m.get('arl0'), '.1f'):>7} {_ci(m.get('arl0_ci')):>20}  "
           f"{_num(m.get('dod'), '.1f'):>7} {_ci(m.get('dod_ci')):>20}  "
           f"{_num(m.get('fa1000')):>7} {_num(m.get('fa1000_std')):>6}")
    return head + "\n" + row


COMMANDS = {"calibrate": cmd_calibrate, "run": cmd_run, "bench": cmd_bench,
            "validate-theory": cmd_validate_theory, "report": cmd_report}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return COMMANDS[a.verb](a)
    except GraphDriftError as exc:
        print(f"graphdrift: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
