"""Command-line entry point: run scenarios, compare reports, replay blocks.

Exit codes: 0 success, 2 configuration or input error, 3 invariant violation
or stall during simulation, 4 replay divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .engine import Simulation, StallDetected, prepare_plan
from .figures import (
    render_comparison_figures,
    render_run_figure,
    render_share_timeline,
)
from .ledger import PipelineOrderError
from .locks import DoubleReleaseError, InvariantViolation
from .metrics import (
    MetricsReport,
    MismatchedWorkload,
    build_report,
    compare_reports,
    fingerprint_digest,
    success_share_buckets,
)
from .oracle import verify_run
from .workload import export_workload_jsonl

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_DIVERGENCE = 4

_SIM_FAILURES = (
    InvariantViolation,
    PipelineOrderError,
    DoubleReleaseError,
    StallDetected,
    AssertionError,
)


def _write_jsonl(path: Path, objs) -> None:
    with open(path, "w") as fh:
        for obj in objs:
            fh.write(json.dumps(obj) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def cmd_run(config_path: str, out_dir: str, verbose: bool = False) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan, injected = prepare_plan(cfg)
    if injected:
        print(f"injected invalid addresses into {len(injected)} transactions")

    sim = Simulation(cfg, plan)
    try:
        result = sim.run()
    except _SIM_FAILURES as exc:
        print(f"invariant violation at tick {sim.now}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    fingerprint = fingerprint_digest(plan.fingerprint_obj())
    report = build_report(result.trace, cfg.strategy.value, cfg.seed, fingerprint)

    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(json.dumps(report.to_json_obj(), indent=2) + "\n")
    _write_jsonl(out / "trace.jsonl", (rec.to_json_obj() for rec in result.trace))
    export_workload_jsonl(plan, str(out / "workload.jsonl"))
    _write_jsonl(out / "blocks.jsonl", (b.to_json_obj() for b in result.blocks))
    (out / "genesis.json").write_text(json.dumps(result.genesis_json, indent=2) + "\n")
    (out / "state.json").write_text(
        json.dumps(result.final_state.to_json_obj(), indent=2) + "\n")
    if verbose and sim.assigner is not None:
        (out / "locks.json").write_text(
            json.dumps(sim.assigner.locks.snapshot(), indent=2) + "\n")

    render_run_figure(report, out / "run_summary.png")
    render_share_timeline(
        success_share_buckets(result.trace), cfg.strategy.value,
        out / "share_timeline.png")

    print(report.to_table(), end="")
    overall = report.overall
    print(
        f"{cfg.strategy.value}: {overall.success}/{overall.terminal} committed "
        f"in {report.duration_sec:.3f}s ({overall.tps:.1f} tps), "
        f"artifacts in {out}"
    )
    return EXIT_OK


def _load_report(path_str: str) -> MetricsReport:
    path = Path(path_str)
    if path.is_dir():
        path = path / "report.json"
    with open(path) as fh:
        return MetricsReport.from_json_obj(json.load(fh))


def cmd_compare(report_paths: list[str], out_dir: str, verbose: bool = False) -> int:
    try:
        reports = [_load_report(p) for p in report_paths]
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load report: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        comparison = compare_reports(reports)
    except MismatchedWorkload as exc:
        print(f"mismatched workloads: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text(comparison.to_csv())
    (out / "compare.json").write_text(
        json.dumps(comparison.to_json_obj(), indent=2) + "\n")
    render_comparison_figures(comparison, out)

    for column in ("tps", "successfulTps", "successRatio", "meanLatencySec"):
        ranked = ", ".join(
            f"{s}={v:.4g}"
            for s, v in comparison.ranking(column, descending=column != "meanLatencySec")
        )
        print(f"{column}: {ranked}")
    print(f"comparison artifacts in {out}")
    return EXIT_OK


def cmd_replay(path_str: str, verbose: bool = False) -> int:
    path = Path(path_str)
    run_dir = path if path.is_dir() else path.parent
    genesis_path = run_dir / "genesis.json"
    blocks_path = run_dir / "blocks.jsonl"
    state_path = run_dir / "state.json"
    missing = [p.name for p in (genesis_path, blocks_path, state_path) if not p.exists()]
    if missing:
        print(f"replay inputs missing in {run_dir}: {', '.join(missing)}",
              file=sys.stderr)
        return EXIT_CONFIG

    genesis_obj = json.loads(genesis_path.read_text())
    block_objs = _read_jsonl(blocks_path)
    final_obj = json.loads(state_path.read_text())
    report = verify_run(genesis_obj, block_objs, final_obj)
    if not report.ok:
        print(f"replay divergence: {report.divergence}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(
        f"replay ok: {report.blocks_replayed} blocks, "
        f"{report.committed} committed, {report.rejected} rejected"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ledgersim",
        description="Deterministic ordering-pipeline simulator and benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario and emit artifacts")
    p_run.add_argument("config", help="scenario config (JSON)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--verbose", action="store_true")

    p_cmp = sub.add_parser("compare", help="compare reports from prior runs")
    p_cmp.add_argument("reports", nargs="+",
                       help="report.json files (or run directories)")
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.add_argument("--verbose", action="store_true")

    p_rep = sub.add_parser("replay", help="verify a run by sequential block replay")
    p_rep.add_argument("path", help="run directory (or any artifact inside it)")
    p_rep.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args.config, args.out, verbose=args.verbose)
    if args.command == "compare":
        return cmd_compare(args.reports, args.out, verbose=args.verbose)
    return cmd_replay(args.path, verbose=args.verbose)


if __name__ == "__main__":
    sys.exit(main())
