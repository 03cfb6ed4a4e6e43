"""End-to-end CLI behavior: artifacts, exit codes, reproducibility."""

import json

import pytest

from ledgersim.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_INVARIANT,
    EXIT_OK,
    main,
)
from ledgersim.engine import Simulation
from ledgersim.locks import InvariantViolation
from ledgersim.metrics import CSV_COLUMNS

SCENARIO = {
    "seed": 17,
    "strategy": "dep-parallel",
    "workload": {
        "counts": {"Type1": 12, "Type2": 6, "ReadBaseline": 8, "UpdateBaseline": 8},
        "accountCount": 8,
        "initialBalance": 5000,
        "arrival": {"model": "open", "rate": 200.0},
    },
    "channels": {"count": 2, "queueLimit": 8},
    "blockSize": 4,
    "batchTimeout": 200,
    "serviceTimes": {"endorse": 3, "analyze": 4, "order": 3, "validate": 1},
    "maxLag": 1,
    "flap": {"period": 400, "down": 60},
}

RUN_ARTIFACTS = (
    "report.csv", "report.json", "trace.jsonl", "workload.jsonl",
    "blocks.jsonl", "genesis.json", "state.json",
    "run_summary.png", "share_timeline.png",
)


def _write_scenario(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_run")
    code = main(["run", _write_scenario(tmp, SCENARIO), "--out", str(tmp / "out")])
    assert code == EXIT_OK
    return tmp / "out"


def test_run_writes_every_artifact(run_dir):
    for name in RUN_ARTIFACTS:
        assert (run_dir / name).exists(), name
        assert (run_dir / name).stat().st_size > 0, name


def test_report_csv_round_trips_against_json(run_dir):
    header = (run_dir / "report.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    report = json.loads((run_dir / "report.json").read_text())
    assert report["meta"]["strategy"] == "dep-parallel"
    assert report["meta"]["seed"] == 17
    rows = {r["txType"]: r for r in report["rows"]}
    assert rows["ALL"]["generated"] == 12 + 6 * 2 + 8 + 8


def test_reruns_emit_byte_identical_traces(run_dir, tmp_path):
    code = main(["run", _write_scenario(tmp_path, SCENARIO), "--out",
                 str(tmp_path / "again")])
    assert code == EXIT_OK
    for name in ("trace.jsonl", "blocks.jsonl", "report.csv", "state.json",
                 "workload.jsonl"):
        assert (tmp_path / "again" / name).read_bytes() == \
            (run_dir / name).read_bytes(), name


def test_replay_accepts_a_clean_run(run_dir, capsys):
    assert main(["replay", str(run_dir)]) == EXIT_OK
    assert "replay ok" in capsys.readouterr().out


def test_replay_accepts_an_artifact_path(run_dir):
    assert main(["replay", str(run_dir / "blocks.jsonl")]) == EXIT_OK


def test_replay_flags_corrupted_blocks(run_dir, tmp_path):
    clone = tmp_path / "bad"
    clone.mkdir()
    for name in ("genesis.json", "blocks.jsonl", "state.json"):
        (clone / name).write_bytes((run_dir / name).read_bytes())
    lines = (clone / "blocks.jsonl").read_text().splitlines()
    # corrupt the final block: writes carry absolute balances, so an earlier
    # corruption could be papered over by a later write to the same wallet
    block = json.loads(lines[-1])
    block["txs"] = [
        {**tx, "writes": [[a, v + 1] for a, v in tx["writes"]]} for tx in block["txs"]
    ]
    lines[-1] = json.dumps(block)
    (clone / "blocks.jsonl").write_text("\n".join(lines) + "\n")
    assert main(["replay", str(clone)]) == EXIT_DIVERGENCE


def test_replay_requires_all_inputs(tmp_path):
    assert main(["replay", str(tmp_path)]) == EXIT_CONFIG


def test_compare_ranks_two_strategies(run_dir, tmp_path, capsys):
    fifo_doc = {**SCENARIO, "strategy": "fifo", "channels": {"count": 1}}
    assert main(["run", _write_scenario(tmp_path, fifo_doc), "--out",
                 str(tmp_path / "fifo")]) == EXIT_OK
    capsys.readouterr()
    code = main(["compare", str(run_dir), str(tmp_path / "fifo"),
                 "--out", str(tmp_path / "cmp")])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "successRatio:" in out
    for name in ("compare.csv", "compare.json", "compare_tps.png",
                 "compare_successRatio.png", "compare_successfulTps.png",
                 "compare_meanLatencySec.png"):
        assert (tmp_path / "cmp" / name).exists(), name
    obj = json.loads((tmp_path / "cmp" / "compare.json").read_text())
    assert sorted(obj["strategies"]) == ["dep-parallel", "fifo"]


def test_compare_rejects_mismatched_workloads(run_dir, tmp_path):
    other = {**SCENARIO, "seed": 18}
    assert main(["run", _write_scenario(tmp_path, other), "--out",
                 str(tmp_path / "other")]) == EXIT_OK
    code = main(["compare", str(run_dir), str(tmp_path / "other"),
                 "--out", str(tmp_path / "cmp2")])
    assert code == EXIT_CONFIG


def test_compare_rejects_missing_report(tmp_path):
    assert main(["compare", str(tmp_path / "nope"), "--out",
                 str(tmp_path / "cmp3")]) == EXIT_CONFIG


@pytest.mark.parametrize("mutate", [
    lambda doc: doc.update(blockSzie=4),                      # unknown key
    lambda doc: doc.update(strategy="round-robin"),           # unknown strategy
    lambda doc: doc["workload"]["counts"].update(Type9=5),    # unknown type
    lambda doc: doc.update(channels={"count": 3}),            # multi-channel fifo
    lambda doc: doc["workload"].update(accountCount=2),       # too few accounts
])
def test_bad_configs_exit_two(tmp_path, mutate):
    doc = json.loads(json.dumps(SCENARIO))
    doc["strategy"] = "fifo"
    doc["channels"] = {"count": 1}
    mutate(doc)
    assert main(["run", _write_scenario(tmp_path, doc), "--out",
                 str(tmp_path / "out")]) == EXIT_CONFIG


def test_unreadable_config_exits_two(tmp_path):
    missing = str(tmp_path / "absent.json")
    assert main(["run", missing, "--out", str(tmp_path / "out")]) == EXIT_CONFIG
    garbled = tmp_path / "bad.json"
    garbled.write_text("{not json")
    assert main(["run", str(garbled), "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_invariant_violation_exits_three(tmp_path, monkeypatch, capsys):
    def explode(self):
        raise InvariantViolation("forced for testing")

    monkeypatch.setattr(Simulation, "run", explode)
    code = main(["run", _write_scenario(tmp_path, SCENARIO), "--out",
                 str(tmp_path / "out")])
    assert code == EXIT_INVARIANT
    err = capsys.readouterr().err
    assert "invariant violation at tick" in err and "forced for testing" in err


def test_verbose_run_dumps_lock_snapshot(tmp_path):
    code = main(["run", _write_scenario(tmp_path, SCENARIO), "--out",
                 str(tmp_path / "out"), "--verbose"])
    assert code == EXIT_OK
    locks = json.loads((tmp_path / "out" / "locks.json").read_text())
    assert locks == {}  # every lock released by the end of a clean run
