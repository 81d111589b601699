"""Run scenarios and shape their results: traces, heatmaps, CSV/JSON exports.

Exports are deterministic: the same scenario and flags always produce
byte-identical files (wall-clock runtime is therefore reported on the
console only, never written to an export).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .engine import (
    BeliefTrace,
    Session,
    advance,
    belief_trace,
    inject_status_report,
    new_session,
    oracle_max_deviation,
)
from .factors import ENUMERATION_CAP
from .scenario import ScenarioConfig

GLYPH_RAMP = " .:*#@"


@dataclass(frozen=True)
class OracleCheck:
    max_deviation: float
    checked_intervals: tuple[int, ...]
    skipped_intervals: tuple[int, ...]


@dataclass(frozen=True)
class RunReport:
    scenario: str
    variant: str
    params: Mapping[str, float]
    regions: tuple[str, ...]
    traces: Mapping[str, BeliefTrace]
    status_states: tuple[str, ...] | None
    status_series: Mapping[str, Mapping[int, np.ndarray]] | None
    evidence_log: tuple[float, ...]
    oracle: OracleCheck | None
    runtime_seconds: float


def run(
    config: ScenarioConfig,
    *,
    oracle_check: bool = False,
    oracle_cap: int = ENUMERATION_CAP,
    virtual_confidence: float | None = None,
) -> RunReport:
    """Execute the full observation sequence and collect the outputs.

    Raises ImpossibleEvidenceError if any observation row is rejected;
    nothing is reported for a failed run.
    """
    start = time.perf_counter()
    session = new_session(
        config.layout,
        config.objects,
        config.params,
        virtual_confidence=virtual_confidence,
    )
    if config.status_reports and not config.params.chained:
        raise ValueError(
            f"status reports need a chained variant, not {config.params.variant!r}"
        )

    prefixes: list[Session] = []
    for k, row in enumerate(config.observations):
        for report in config.status_reports:
            if report.at == k:
                session = inject_status_report(
                    session, report.sensor, k, report.confidence
                )
        session = advance(session, row)
        prefixes.append(session)

    oracle = None
    if oracle_check:
        worst, checked, skipped = 0.0, [], []
        for prefix in prefixes:
            deviation = oracle_max_deviation(prefix, cap=oracle_cap)
            if deviation is None:
                skipped.append(prefix.t)
            else:
                checked.append(prefix.t)
                worst = max(worst, deviation)
        oracle = OracleCheck(worst, tuple(checked), tuple(skipped))

    traces = {oid: belief_trace(session, oid) for oid in config.trace_objects}
    status_states = None
    status_series = None
    if config.params.has_inv and session.trace:
        status_states = config.params.inv_states
        final = session.trace[-1].status_beliefs
        status_series = {sid: dict(final[sid]) for sid in config.status_sensors}

    return RunReport(
        scenario=config.name,
        variant=config.params.variant,
        params={
            name: value
            for name in ("conf1", "conf2", "conf", "d", "X", "x")
            if (value := getattr(config.params, name)) is not None
        },
        regions=config.layout.regions,
        traces=traces,
        status_states=status_states,
        status_series=status_series,
        evidence_log=session.evidence_log,
        oracle=oracle,
        runtime_seconds=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# Text heatmap
# --------------------------------------------------------------------------


def glyph(belief: float) -> str:
    """Map a belief in [0, 1] onto the ramp by deciles, two per step."""
    decile = min(9, int(belief * 10))
    return GLYPH_RAMP[(decile + 1) // 2]


def render_trace(trace: BeliefTrace) -> str:
    """One row per evaluation time; per earlier interval, one glyph cell per
    region, dense glyphs marking where the belief mass sits."""
    width = len(trace.states)
    eval_times = sorted(trace.columns)
    if not eval_times:
        return f"{trace.object_id}: (no observations)"
    lines = [
        f"{trace.object_id} position beliefs "
        f"(regions {', '.join(trace.states)}; ramp {GLYPH_RAMP!r})"
    ]
    header = "      " + " ".join(f"t={t}".center(width) for t in range(eval_times[-1] + 1))
    lines.append(header)
    for k in eval_times:
        cells = [
            "".join(glyph(b) for b in trace.columns[k][t])
            for t in sorted(trace.columns[k])
        ]
        lines.append(f"T{k:<4} " + " ".join(cells))
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Exports
# --------------------------------------------------------------------------

CSV_HEADER = "eval_time,node,time,state,belief"


def _trace_rows(report: RunReport) -> Iterator[tuple[int, str, int, str, float]]:
    for oid in sorted(report.traces):
        trace = report.traces[oid]
        for k in sorted(trace.columns):
            for t in sorted(trace.columns[k]):
                for state, belief in zip(trace.states, trace.columns[k][t]):
                    yield k, oid, t, state, float(belief)


def export_trace_csv(report: RunReport) -> str:
    lines = [CSV_HEADER]
    for k, node, t, state, belief in _trace_rows(report):
        lines.append(f"{k},{node},{t},{state},{belief:.6f}")
    return "\n".join(lines) + "\n"


def export_status_csv(report: RunReport) -> str:
    if report.status_series is None:
        raise ValueError("run has no sensor-status series")
    eval_time = max(
        (max(t.columns, default=0) for t in report.traces.values()), default=0
    )
    lines = [CSV_HEADER]
    for sid in sorted(report.status_series):
        for t in sorted(report.status_series[sid]):
            dist = report.status_series[sid][t]
            for state, belief in zip(report.status_states, dist):
                lines.append(f"{eval_time},{sid},{t},{state},{float(belief):.6f}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: RunReport) -> dict:
    """JSON-ready mirror of the report (runtime excluded: exports must be
    byte-identical across runs)."""
    out: dict = {
        "schema": 1,
        "scenario": report.scenario,
        "variant": report.variant,
        "params": dict(report.params),
        "regions": list(report.regions),
        "evidence_log": list(report.evidence_log),
        "traces": {
            oid: {
                "states": list(trace.states),
                "columns": {
                    str(k): {
                        str(t): [float(b) for b in trace.columns[k][t]]
                        for t in sorted(trace.columns[k])
                    }
                    for k in sorted(trace.columns)
                },
            }
            for oid, trace in sorted(report.traces.items())
        },
    }
    if report.status_series is None:
        out["sensor_status"] = None
    else:
        out["sensor_status"] = {
            "states": list(report.status_states),
            "series": {
                sid: {
                    str(t): [float(b) for b in series[t]] for t in sorted(series)
                }
                for sid, series in sorted(report.status_series.items())
            },
        }
    if report.oracle is None:
        out["oracle"] = None
    else:
        out["oracle"] = {
            "max_deviation": report.oracle.max_deviation,
            "checked_intervals": list(report.oracle.checked_intervals),
            "skipped_intervals": list(report.oracle.skipped_intervals),
        }
    return out


def export_report_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def trace_from_dict(doc: dict, object_id: str) -> BeliefTrace:
    """Rebuild a BeliefTrace from an exported report dictionary."""
    entry = doc["traces"][object_id]
    return BeliefTrace(
        object_id=object_id,
        states=tuple(entry["states"]),
        columns={
            int(k): {int(t): np.array(v) for t, v in col.items()}
            for k, col in entry["columns"].items()
        },
    )
