"""Metrics computed from synthetic traces with hand-checked expected values."""

import pytest

from ledgersim.engine import TraceRecord
from ledgersim.metrics import (
    ALL,
    CSV_COLUMNS,
    ComparisonReport,
    IncompleteTrace,
    MetricsReport,
    MismatchedWorkload,
    build_report,
    compare_reports,
    fingerprint_digest,
    is_included,
    success_share_buckets,
)


def _rec(tx_id, frm, to, tick, reason=None, tx_type="Type3", channel=None):
    return TraceRecord(tx_id, frm, to, tick, channel, reason, tx_type)


def _report(trace, strategy="fifo", seed=1, fingerprint="f" * 16):
    return build_report(trace, strategy, seed, fingerprint)


def _uniform_trace(committed=520, failed=480):
    """All submits at tick 0, all terminals from Ordering at tick 2500."""
    trace = []
    for i in range(committed + failed):
        trace.append(_rec(i, None, "Pending", 0))
        if i < committed:
            trace.append(_rec(i, "Ordering", "Committed", 2500, channel=0))
        else:
            trace.append(_rec(i, "Ordering", "Failed", 2500, reason="Stale", channel=0))
    return trace


def test_throughput_and_ratio_are_exact():
    report = _report(_uniform_trace())
    row = report.overall
    # 1000 block-validated txs over exactly 2.5 simulated seconds
    assert report.duration_sec == 2.5
    assert row.generated == 1000
    assert row.tps == 400.0
    assert row.successful_tps == 208.0
    assert row.success_share == 0.52
    assert row.success_ratio == 0.52
    assert row.submitted_tps == 400.0
    assert row.processed_tps == 400.0
    assert row.mean_latency_sec == 2.5
    assert row.success_latency_sec == 2.5
    assert row.fail_stale == 480 and row.fail == 480
    assert row.terminal == 1000
    # single-type run: the type row mirrors the ALL row
    assert report.row("Type3").to_json_obj() == {
        **row.to_json_obj(), "txType": "Type3"}


def test_empty_trace_builds_an_empty_report():
    report = _report([])
    assert report.duration_sec == 0.0
    assert list(report.rows) == [ALL]
    assert report.overall.tps == 0.0 and report.overall.generated == 0


def test_same_tick_run_clamps_duration_to_one_tick():
    trace = [_rec(1, None, "Pending", 40), _rec(1, "Endorsed", "Committed", 40)]
    report = _report(trace)
    assert report.duration_sec == 0.001


@pytest.mark.parametrize("trace,message", [
    ([_rec(1, None, "Pending", 0), _rec(1, None, "Pending", 5)], "submitted twice"),
    ([_rec(1, None, "Pending", 0), _rec(1, "Ordering", "Committed", 5),
      _rec(1, "Ordering", "Failed", 6)], "finished twice"),
    ([_rec(1, "Ordering", "Committed", 5)], "without a submission"),
    ([_rec(1, None, "Pending", 9), _rec(1, "Ordering", "Committed", 5)],
     "before it was submitted"),
])
def test_malformed_traces_are_rejected(trace, message):
    with pytest.raises(IncompleteTrace, match=message):
        _report(trace)


@pytest.mark.parametrize("rec,expected", [
    # anything leaving the orderer was block-validated
    (_rec(1, "Ordering", "Committed", 9), True),
    (_rec(1, "Ordering", "Failed", 9, reason="Stale"), True),
    (_rec(1, "Ordering", "Failed", 9, reason="UnknownAddress"), True),
    # balance queries answered from state
    (_rec(1, "Endorsed", "Committed", 9), True),
    (_rec(1, "Endorsed", "Failed", 9, reason="Stale"), True),
    (_rec(1, "Endorsed", "Failed", 9, reason="UnknownAddress"), True),
    # endorsement rejections never touched state validation
    (_rec(1, "Pending", "Failed", 9, reason="Overdraft"), False),
    (_rec(1, "Endorsed", "Failed", 9, reason="Unavailable"), False),
    # dispatch-gate drops and analysis discards were filtered out early
    (_rec(1, "Queued", "Failed", 9, reason="Overdraft"), False),
    (_rec(1, "Endorsed", "Discarded", 9, reason="InvalidWallet"), False),
    # non-terminal transitions are never included
    (_rec(1, "Queued", "Ordering", 9), False),
    (_rec(1, None, "Pending", 9), False),
])
def test_included_transaction_rules(rec, expected):
    assert is_included(rec) is expected


def test_failure_reasons_split_into_frozen_columns():
    trace = [_rec(i, None, "Pending", 0) for i in range(7)]
    trace += [
        _rec(0, "Ordering", "Failed", 10, reason="Stale"),
        _rec(1, "Ordering", "Failed", 10, reason="UnknownAddress"),
        _rec(2, "Pending", "Failed", 10, reason="Overdraft"),
        _rec(3, "Pending", "Failed", 10, reason="Unavailable"),
        _rec(4, "Pending", "Failed", 10, reason="MismatchedRwSets"),
        _rec(5, "Pending", "Failed", 10, reason="NotEndorsed"),
        _rec(6, "Endorsed", "Discarded", 10, reason="InvalidWallet"),
    ]
    row = _report(trace).overall
    assert (row.fail_stale, row.fail_unknown_address, row.fail_overdraft,
            row.fail_unavailable, row.fail_rejected, row.discarded) == \
        (1, 1, 1, 1, 2, 1)
    assert row.fail == 6
    assert row.success_ratio == 0.0
    # discarded counts against the ratio but not as an included tx
    assert row.terminal == 7
    assert row.tps == 2 / 0.01


def test_latency_averages_split_by_outcome():
    trace = [
        _rec(1, None, "Pending", 0), _rec(1, "Ordering", "Committed", 100),
        _rec(2, None, "Pending", 0), _rec(2, "Ordering", "Committed", 300),
        _rec(3, None, "Pending", 0), _rec(3, "Ordering", "Failed", 800, reason="Stale"),
    ]
    row = _report(trace).overall
    assert row.mean_latency_sec == 0.4
    assert row.success_latency_sec == 0.2


def test_csv_has_frozen_header_and_canonical_row_order():
    trace = [
        _rec(1, None, "Pending", 0, tx_type="Type1"),
        _rec(1, "Ordering", "Committed", 10, tx_type="Type1"),
        _rec(2, None, "Pending", 0, tx_type="ReadBaseline"),
        _rec(2, "Endorsed", "Committed", 5, tx_type="ReadBaseline"),
        _rec(3, None, "Pending", 0, tx_type="UpdateBaseline"),
        _rec(3, "Ordering", "Failed", 20, reason="Stale", tx_type="UpdateBaseline"),
    ]
    csv = _report(trace).to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert [ln.split(",")[1] for ln in lines[1:]] == \
        ["ReadBaseline", "UpdateBaseline", "Type1", "ALL"]
    assert csv.endswith("\n")


def test_table_renders_all_columns():
    table = _report(_uniform_trace(2, 1)).to_table()
    first = table.split("\n")[0].split()
    assert first == list(CSV_COLUMNS)


def test_report_json_round_trip():
    report = _report(_uniform_trace(30, 20), strategy="dep-parallel", seed=7)
    clone = MetricsReport.from_json_obj(report.to_json_obj())
    assert clone.to_json_obj() == report.to_json_obj()
    assert clone.overall.success == 30
    assert clone.fingerprint == report.fingerprint


def test_success_share_buckets_group_by_terminal_second():
    trace = [
        _rec(1, None, "Pending", 0), _rec(1, "Ordering", "Committed", 100),
        _rec(2, None, "Pending", 0), _rec(2, "Ordering", "Failed", 900, reason="Stale"),
        # second 1 holds only a gate drop, which is not an included tx
        _rec(3, None, "Pending", 0), _rec(3, "Queued", "Failed", 1500, reason="Overdraft"),
        _rec(4, None, "Pending", 0), _rec(4, "Ordering", "Committed", 2500),
    ]
    assert success_share_buckets(trace) == [(0, 0.5), (2, 1.0)]


def test_fingerprint_digest_is_canonical():
    a = fingerprint_digest({"a": 1, "b": [1, 2]})
    b = fingerprint_digest({"b": [1, 2], "a": 1})
    assert a == b
    assert len(a) == 16 and int(a, 16) >= 0
    assert a != fingerprint_digest({"a": 1, "b": [2, 1]})


def test_compare_rejects_mismatched_workloads():
    a = _report(_uniform_trace(2, 0), strategy="fifo", fingerprint="a" * 16)
    b = _report(_uniform_trace(2, 0), strategy="timestamp", fingerprint="b" * 16)
    with pytest.raises(MismatchedWorkload):
        compare_reports([a, b])
    with pytest.raises(ValueError):
        compare_reports([])


def test_comparison_rankings_and_json_shape():
    fast = _report(_uniform_trace(40, 0), strategy="dep-parallel")
    slow = _report(_uniform_trace(10, 30), strategy="fifo")
    comparison = compare_reports([fast, slow])
    assert isinstance(comparison, ComparisonReport)
    assert comparison.ranking("successfulTps") == [
        ("dep-parallel", 16.0), ("fifo", 4.0)]
    obj = comparison.to_json_obj()
    assert obj["strategies"] == ["dep-parallel", "fifo"]
    assert [r["strategy"] for r in obj["rankings"]["successRatio"]] == \
        ["dep-parallel", "fifo"]
    # latency ranks ascending: lower is better
    assert obj["rankings"]["meanLatencySec"][0]["strategy"] == "dep-parallel"
    csv_lines = comparison.to_csv().strip().split("\n")
    assert len(csv_lines) == 1 + 2 * 2  # header + (type row + ALL) per report
