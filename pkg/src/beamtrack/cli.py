"""Command-line front end.

    beamtrack run scenarios/table2.scenario --trace --export csv --out out/

Exit status: 0 on success, 1 for configuration problems, 2 when the model
rejects the observations as impossible.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .factors import ImpossibleEvidenceError
from .report import (
    RunReport,
    export_report_json,
    export_status_csv,
    export_trace_csv,
    render_trace,
    run,
)
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IMPOSSIBLE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamtrack",
        description="Track objects through beam-sensor regions and "
        "diagnose sensor faults by exact inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a scenario file")
    runp.add_argument("scenario", help="path to a scenario document")
    runp.add_argument("--variant", help="override the sensor model variant")
    for name, help_text in [
        ("conf1", "confidence in reported crossings (modified)"),
        ("conf2", "confidence in quiet sensors (modified)"),
        ("conf", "prior probability the sensor works (status variants)"),
        ("d", "per-interval degradation probability (chained variants)"),
        ("X", "per-interval recovery probability (chained variants)"),
        ("x", "correct-report probability of a defective sensor (intermittent)"),
    ]:
        runp.add_argument(f"--{name}", type=float, help=f"override {help_text}")
    runp.add_argument(
        "--mobility", type=float, help="override every object's move probability"
    )
    runp.add_argument(
        "--oracle-check",
        action="store_true",
        help="cross-check posteriors against brute-force enumeration",
    )
    runp.add_argument(
        "--trace", action="store_true", help="print belief heatmaps to stdout"
    )
    runp.add_argument(
        "--export",
        action="append",
        choices=("csv", "json"),
        default=None,
        help="write trace/status/report files (repeatable)",
    )
    runp.add_argument(
        "--out", default=".", help="directory for exported files (default: .)"
    )
    return parser


def _apply_overrides(config, args):
    params = config.params
    overrides = {
        name: getattr(args, name)
        for name in ("conf1", "conf2", "conf", "d", "X", "x")
        if getattr(args, name) is not None
    }
    if args.variant is not None:
        from .world import SensorModelParams

        merged = {
            name: overrides.get(name, getattr(params, name))
            for name in ("conf1", "conf2", "conf", "d", "X", "x")
        }
        params = SensorModelParams(args.variant, **merged)
    elif overrides:
        params = params.override(**overrides)
    config = config.with_params(params)
    if args.mobility is not None:
        config = config.with_mobility(args.mobility)
    return config


def _write_exports(report: RunReport, formats, out_dir: Path) -> list[Path]:
    # Everything is rendered before anything is written, so a failure never
    # leaves a partial export behind.
    files: list[tuple[Path, str]] = []
    stem = report.scenario
    if "csv" in formats:
        files.append((out_dir / f"{stem}.trace.csv", export_trace_csv(report)))
        if report.status_series is not None:
            files.append((out_dir / f"{stem}.status.csv", export_status_csv(report)))
    if "json" in formats:
        files.append((out_dir / f"{stem}.report.json", export_report_json(report)))
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, text in files:
        path.write_text(text, encoding="utf-8")
    return [path for path, _ in files]


def _print_summary(report: RunReport) -> None:
    print(f"scenario: {report.scenario} (variant {report.variant})")
    for name, value in report.params.items():
        print(f"  {name} = {value}")
    for k, mass in enumerate(report.evidence_log, start=1):
        print(f"  P(evidence through T{k}) = {mass:.6g}")
    for oid, trace in sorted(report.traces.items()):
        if not trace.columns:
            continue
        latest = max(trace.columns)
        current = trace.columns[latest][latest]
        cells = ", ".join(
            f"{r}: {b:.4f}" for r, b in zip(trace.states, current)
        )
        print(f"  {oid} position at T{latest}: {cells}")
    if report.status_series is not None:
        for sid, series in sorted(report.status_series.items()):
            latest = max(series)
            cells = ", ".join(
                f"{s}: {b:.4f}"
                for s, b in zip(report.status_states, series[latest])
            )
            print(f"  {sid} status at T{latest}: {cells}")
    if report.oracle is not None:
        checked = ", ".join(f"T{t}" for t in report.oracle.checked_intervals) or "none"
        print(
            f"  oracle check: max deviation {report.oracle.max_deviation:.3e} "
            f"(intervals {checked})"
        )
        if report.oracle.skipped_intervals:
            skipped = ", ".join(f"T{t}" for t in report.oracle.skipped_intervals)
            print(f"  oracle check skipped (too large to enumerate): {skipped}")
    print(f"  runtime: {report.runtime_seconds:.3f}s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_scenario(args.scenario)
        config = _apply_overrides(config, args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(config, oracle_check=args.oracle_check)
    except ImpossibleEvidenceError as exc:
        print(f"impossible evidence: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _print_summary(report)
    if args.trace:
        for oid in sorted(report.traces):
            print()
            print(render_trace(report.traces[oid]))
    if args.export:
        for path in _write_exports(report, set(args.export), Path(args.out)):
            print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
