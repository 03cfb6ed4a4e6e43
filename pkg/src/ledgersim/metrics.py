"""Benchmark metrics derived from a run's transition trace.

Everything here is computed from trace records alone, so a report can be
rebuilt from a persisted ``trace.jsonl`` without rerunning the simulation.
This module stays machine-readable on purpose: delimited text, JSON, and
plain tables only.  Rendering belongs to the CLI layer.

Counting rules:

* generated     - submissions (records entering ``Pending``).
* success/fail  - terminal records; ``Discarded`` counts as its own bucket
                  and as a failure for the success ratio.
* included      - transactions whose read sets were actually validated
                  against state: everything leaving ``Ordering`` (block
                  inclusion) plus balance queries answered from state.
* tps           - included per second of run wall-clock (first submission to
                  last terminal transition).
* successfulTps - committed per second; ``successShare`` is their quotient.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .engine import TraceRecord
from .ledger import CANONICAL_TYPE_ORDER, TICKS_PER_SECOND

ALL = "ALL"

_TERMINAL = ("Committed", "Failed", "Discarded")

# frozen artifact schema: delimited reports always use exactly these columns
CSV_COLUMNS = (
    "strategy",
    "txType",
    "generated",
    "success",
    "fail",
    "tps",
    "meanLatencySec",
    "successRatio",
    "successfulTps",
    "successShare",
    "submittedTps",
    "processedTps",
    "successLatencySec",
    "failOverdraft",
    "failUnavailable",
    "failStale",
    "failUnknownAddress",
    "failRejected",
    "discarded",
)

_REJECTED_REASONS = ("MismatchedRwSets", "NotEndorsed")


class IncompleteTrace(ValueError):
    """The trace is missing transitions needed to compute a metric."""


class MismatchedWorkload(ValueError):
    """Reports being compared were produced from different workloads."""


def fingerprint_digest(obj: dict) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def is_included(rec: TraceRecord) -> bool:
    """Did this terminal transition come out of a state validation?"""
    if rec.to not in _TERMINAL:
        return False
    if rec.frm == "Ordering":
        return True
    if rec.frm == "Endorsed" and rec.to == "Committed":
        return True
    return (
        rec.frm == "Endorsed"
        and rec.to == "Failed"
        and rec.reason in ("Stale", "UnknownAddress")
    )


@dataclass
class MetricsRow:
    strategy: str
    tx_type: str
    generated: int = 0
    success: int = 0
    fail: int = 0
    tps: float = 0.0
    mean_latency_sec: float = 0.0
    success_ratio: float = 0.0
    successful_tps: float = 0.0
    success_share: float = 0.0
    submitted_tps: float = 0.0
    processed_tps: float = 0.0
    success_latency_sec: float = 0.0
    fail_overdraft: int = 0
    fail_unavailable: int = 0
    fail_stale: int = 0
    fail_unknown_address: int = 0
    fail_rejected: int = 0
    discarded: int = 0

    _FIELD_BY_COLUMN = {
        "strategy": "strategy",
        "txType": "tx_type",
        "generated": "generated",
        "success": "success",
        "fail": "fail",
        "tps": "tps",
        "meanLatencySec": "mean_latency_sec",
        "successRatio": "success_ratio",
        "successfulTps": "successful_tps",
        "successShare": "success_share",
        "submittedTps": "submitted_tps",
        "processedTps": "processed_tps",
        "successLatencySec": "success_latency_sec",
        "failOverdraft": "fail_overdraft",
        "failUnavailable": "fail_unavailable",
        "failStale": "fail_stale",
        "failUnknownAddress": "fail_unknown_address",
        "failRejected": "fail_rejected",
        "discarded": "discarded",
    }

    @property
    def terminal(self) -> int:
        return self.success + self.fail + self.discarded

    def to_json_obj(self) -> dict:
        return {col: getattr(self, attr) for col, attr in self._FIELD_BY_COLUMN.items()}

    @staticmethod
    def from_json_obj(obj: dict) -> "MetricsRow":
        kwargs = {attr: obj[col] for col, attr in MetricsRow._FIELD_BY_COLUMN.items()}
        return MetricsRow(**kwargs)


@dataclass
class MetricsReport:
    strategy: str
    seed: int
    fingerprint: str
    duration_sec: float
    rows: dict[str, MetricsRow] = field(default_factory=dict)

    @property
    def overall(self) -> MetricsRow:
        return self.rows[ALL]

    def row(self, tx_type: str) -> MetricsRow:
        return self.rows[tx_type]

    def ordered_rows(self) -> list[MetricsRow]:
        order = [t.value for t in CANONICAL_TYPE_ORDER if t.value in self.rows]
        return [self.rows[t] for t in order] + [self.rows[ALL]]

    def to_json_obj(self) -> dict:
        return {
            "meta": {
                "strategy": self.strategy,
                "seed": self.seed,
                "fingerprint": self.fingerprint,
                "durationSec": self.duration_sec,
            },
            "rows": [r.to_json_obj() for r in self.ordered_rows()],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "MetricsReport":
        meta = obj["meta"]
        report = MetricsReport(
            strategy=meta["strategy"],
            seed=int(meta["seed"]),
            fingerprint=meta["fingerprint"],
            duration_sec=float(meta["durationSec"]),
        )
        for row_obj in obj["rows"]:
            row = MetricsRow.from_json_obj(row_obj)
            report.rows[row.tx_type] = row
        return report

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.ordered_rows():
            obj = row.to_json_obj()
            lines.append(",".join(_format_cell(obj[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        headers = list(CSV_COLUMNS)
        cells = [headers]
        for row in self.ordered_rows():
            obj = row.to_json_obj()
            cells.append([_format_cell(obj[c]) for c in headers])
        widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
        out = []
        for r in cells:
            out.append("  ".join(val.rjust(w) for val, w in zip(r, widths)))
        return "\n".join(out) + "\n"


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _latency_sec(ticks: list[int]) -> float:
    if not ticks:
        return 0.0
    return sum(ticks) / len(ticks) / TICKS_PER_SECOND


def build_report(
    trace: list[TraceRecord], strategy: str, seed: int, fingerprint: str
) -> MetricsReport:
    submits: dict[int, TraceRecord] = {}
    terminals: dict[int, TraceRecord] = {}
    for rec in trace:
        if rec.frm is None:
            if rec.tx_id in submits:
                raise IncompleteTrace(f"tx {rec.tx_id} submitted twice")
            submits[rec.tx_id] = rec
        if rec.to in _TERMINAL:
            if rec.tx_id in terminals:
                raise IncompleteTrace(f"tx {rec.tx_id} finished twice")
            terminals[rec.tx_id] = rec

    for tx_id, rec in terminals.items():
        sub = submits.get(tx_id)
        if sub is None:
            raise IncompleteTrace(f"tx {tx_id} finished without a submission record")
        if rec.tick < sub.tick:
            raise IncompleteTrace(f"tx {tx_id} finished before it was submitted")

    if submits and terminals:
        start = min(r.tick for r in submits.values())
        end = max(r.tick for r in terminals.values())
        duration = max(end - start, 1) / TICKS_PER_SECOND
    else:
        duration = 0.0

    report = MetricsReport(strategy, seed, fingerprint, duration)
    types = sorted({r.tx_type for r in trace})
    latencies: dict[str, list[int]] = {t: [] for t in types + [ALL]}
    success_latencies: dict[str, list[int]] = {t: [] for t in types + [ALL]}
    included: dict[str, int] = {t: 0 for t in types + [ALL]}
    for t in types + [ALL]:
        report.rows[t] = MetricsRow(strategy=strategy, tx_type=t)

    for rec in submits.values():
        report.rows[rec.tx_type].generated += 1
        report.rows[ALL].generated += 1

    for rec in terminals.values():
        for key in (rec.tx_type, ALL):
            row = report.rows[key]
            latency = rec.tick - submits[rec.tx_id].tick
            latencies[key].append(latency)
            if rec.to == "Committed":
                row.success += 1
                success_latencies[key].append(latency)
            elif rec.to == "Discarded":
                row.discarded += 1
            else:
                row.fail += 1
                if rec.reason == "Overdraft":
                    row.fail_overdraft += 1
                elif rec.reason == "Unavailable":
                    row.fail_unavailable += 1
                elif rec.reason == "Stale":
                    row.fail_stale += 1
                elif rec.reason == "UnknownAddress":
                    row.fail_unknown_address += 1
                elif rec.reason in _REJECTED_REASONS:
                    row.fail_rejected += 1
            if is_included(rec):
                included[key] += 1

    for key, row in report.rows.items():
        if duration > 0:
            row.tps = included[key] / duration
            row.successful_tps = row.success / duration
            row.submitted_tps = row.generated / duration
            row.processed_tps = row.terminal / duration
        row.success_share = row.successful_tps / row.tps if row.tps else 0.0
        row.success_ratio = row.success / row.terminal if row.terminal else 0.0
        row.mean_latency_sec = _latency_sec(latencies[key])
        row.success_latency_sec = _latency_sec(success_latencies[key])
    return report


def success_share_buckets(trace: list[TraceRecord]) -> list[tuple[int, float]]:
    """Per-second share of included transactions that committed.

    Buckets are whole seconds of simulated time keyed by the terminal
    transition's tick; seconds with no included transactions are omitted.
    """
    committed: dict[int, int] = {}
    totals: dict[int, int] = {}
    for rec in trace:
        if not is_included(rec):
            continue
        bucket = rec.tick // TICKS_PER_SECOND
        totals[bucket] = totals.get(bucket, 0) + 1
        if rec.to == "Committed":
            committed[bucket] = committed.get(bucket, 0) + 1
    return [
        (bucket, committed.get(bucket, 0) / totals[bucket])
        for bucket in sorted(totals)
    ]


@dataclass
class ComparisonReport:
    reports: list[MetricsReport]

    def ranking(self, column: str, tx_type: str = ALL, descending: bool = True
                ) -> list[tuple[str, float]]:
        attr = MetricsRow._FIELD_BY_COLUMN[column]
        pairs = [
            (rep.strategy, getattr(rep.rows[tx_type], attr))
            for rep in self.reports
            if tx_type in rep.rows
        ]
        return sorted(pairs, key=lambda kv: (-kv[1], kv[0]) if descending else (kv[1], kv[0]))

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for rep in self.reports:
            for row in rep.ordered_rows():
                obj = row.to_json_obj()
                lines.append(",".join(_format_cell(obj[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        rank_columns = ("tps", "successfulTps", "successRatio", "meanLatencySec")
        return {
            "fingerprint": self.reports[0].fingerprint if self.reports else None,
            "strategies": [rep.strategy for rep in self.reports],
            "rankings": {
                col: [
                    {"strategy": s, "value": v}
                    for s, v in self.ranking(col, descending=col != "meanLatencySec")
                ]
                for col in rank_columns
            },
            "reports": [rep.to_json_obj() for rep in self.reports],
        }


def compare_reports(reports: list[MetricsReport]) -> ComparisonReport:
    if not reports:
        raise ValueError("nothing to compare")
    first = reports[0].fingerprint
    for rep in reports[1:]:
        if rep.fingerprint != first:
            raise MismatchedWorkload(
                f"{rep.strategy} ran workload {rep.fingerprint}, expected {first}")
    return ComparisonReport(list(reports))
