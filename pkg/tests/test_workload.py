"""Workload generation: determinism, shapes, arrival slots, fault injection."""

import json
import math

import pytest

from ledgersim.ledger import AccessType, TxType, is_wellformed_address
from ledgersim.workload import (
    ClosedLoop,
    OpenLoop,
    WorkloadConfig,
    export_workload_jsonl,
    generate_workload,
    import_workload_jsonl,
    inject_invalid_addresses,
)


def _cfg(counts, **kw):
    return WorkloadConfig(seed=5, counts=counts, **kw)


def _plan(counts, **kw):
    return generate_workload(_cfg(counts, **kw))


def test_generation_is_deterministic():
    cfg = _cfg({TxType.TYPE1: 50, TxType.TYPE2: 20, TxType.READ_BASELINE: 30})
    a = generate_workload(cfg)
    b = generate_workload(cfg)
    assert [t.to_json_obj() for t in a.transactions] == [t.to_json_obj() for t in b.transactions]
    assert a.genesis_balances == b.genesis_balances


def test_type2_expands_to_two_transactions_per_instance():
    plan = _plan({TxType.TYPE2: 25, TxType.TYPE1: 10})
    assert len(plan.transactions) == 25 * 2 + 10
    pairs = [t for t in plan.transactions if t.tx_type is TxType.TYPE2]
    assert len(pairs) == 50


def test_type2_pair_query_comes_first_and_shares_the_slot():
    plan = _plan({TxType.TYPE2: 30})
    txs = plan.transactions
    i = 0
    seen_pairs = 0
    while i < len(txs):
        query, transfer = txs[i], txs[i + 1]
        assert transfer.id == query.id + 1
        # lower id is the balance query, so a timestamp sort keeps it first
        assert all(op.access is AccessType.READ for op in query.operands)
        assert any(op.access is AccessType.WRITE for op in transfer.operands)
        assert query.submit_time == transfer.submit_time
        assert query.timestamp == transfer.timestamp
        seen_pairs += 1
        i += 2
    assert seen_pairs == 30


def test_open_loop_submit_ticks_follow_the_rate():
    arrival = OpenLoop(rate_tps=40.0)
    assert [arrival.submit_tick(i) for i in range(4)] == [0, 25, 50, 75]
    plan = _plan({TxType.TYPE4: 8}, arrival=OpenLoop(40.0))
    assert [t.submit_time for t in plan.transactions] == [0, 25, 50, 75, 100, 125, 150, 175]


def test_closed_loop_leaves_submit_times_to_the_engine():
    plan = _plan({TxType.TYPE4: 5}, arrival=ClosedLoop(clients=2))
    assert all(t.submit_time == -1 for t in plan.transactions)


def test_fixed_roles_with_exactly_four_accounts():
    plan = _plan({TxType.TYPE1: 20})
    for tx in plan.transactions:
        assert [op.addr for op in tx.operands] == ["W-A", "W-B", "W-C"]
        debit, b, c = tx.operands
        x = -debit.amount
        assert (b.amount, c.amount) == (math.ceil(x / 2), math.floor(x / 2))


def test_roles_are_sampled_when_more_accounts_exist():
    plan = _plan({TxType.TYPE1: 200}, accounts=[f"W-N{i:02d}" for i in range(1, 17)])
    sources = {tx.operands[0].addr for tx in plan.transactions}
    assert len(sources) > 4


def test_type6_targets_the_flappable_wallet_by_default():
    plan = _plan({TxType.TYPE6: 40})
    for tx in plan.transactions:
        assert tx.operands[1].addr == plan.config.flappable_wallet == "W-D"


def test_type6_probability_spreads_targets():
    plan = _plan({TxType.TYPE6: 300}, type6_unavailable_prob=0.3)
    hits = sum(1 for t in plan.transactions if t.operands[1].addr == "W-D")
    assert 40 < hits < 150  # ~90 expected
    for tx in plan.transactions:
        assert tx.operands[1].addr != tx.operands[0].addr


def test_amounts_respect_the_configured_range():
    plan = _plan({TxType.TYPE1: 100, TxType.UPDATE_BASELINE: 50}, amount_range=(10, 20))
    for tx in plan.transactions:
        debit = -tx.operands[0].amount
        assert 10 <= debit <= 20


def test_type4_and_type5_move_the_fixed_faucet_amount():
    plan = _plan({TxType.TYPE4: 5, TxType.TYPE5: 5})
    for tx in plan.transactions:
        if tx.tx_type is TxType.TYPE4:
            (op,) = tx.operands
            assert op.amount == 100
        else:
            debit, credit = tx.operands
            assert debit.amount == -100 and credit.amount == 100
            assert credit.addr.startswith("W-x")
            assert plan.genesis_balances[credit.addr] == 0


def test_genesis_universe_matches_requested_types():
    plan = _plan({TxType.WRITE_BASELINE: 6, TxType.READ_BASELINE: 3})
    g = plan.genesis_balances
    # four role accounts at the opening balance
    assert all(g[a] == 10_000 for a in ("W-A", "W-B", "W-C", "W-D"))
    # write targets exist empty, floats carry enough to fund every create
    targets = [a for a in g if a.startswith("W-w")]
    assert len(targets) == 6 and all(g[a] == 0 for a in targets)
    floats = [a for a in g if a.startswith("W-f")]
    assert len(floats) == 16 and all(g[a] == 60_000 for a in floats)
    assert len([a for a in g if a.startswith("W-r")]) == 64
    assert not [a for a in g if a.startswith("W-u")]  # no updates requested


def test_requesting_contention_needs_four_accounts():
    with pytest.raises(ValueError):
        WorkloadConfig(seed=1, counts={TxType.TYPE3: 1}, accounts=["W-A", "W-B"])


def test_export_import_round_trip(tmp_path):
    plan = _plan({TxType.TYPE1: 10, TxType.TYPE2: 5})
    path = tmp_path / "workload.jsonl"
    export_workload_jsonl(plan, str(path))
    clones = import_workload_jsonl(str(path))
    assert [t.to_json_obj() for t in clones] == [t.to_json_obj() for t in plan.transactions]
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"id", "txType", "operands", "submitTime", "timestamp"}


def test_fingerprint_tracks_workload_identity():
    a = _plan({TxType.TYPE1: 5}).fingerprint_obj()
    b = _plan({TxType.TYPE1: 5}).fingerprint_obj()
    c = generate_workload(WorkloadConfig(seed=6, counts={TxType.TYPE1: 5})).fingerprint_obj()
    assert a == b
    assert a != c


# ------------------------------------------------------------- injection

def test_injection_rate_zero_touches_nothing():
    plan = _plan({TxType.TYPE1: 50})
    before = [t.to_json_obj() for t in plan.transactions]
    assert inject_invalid_addresses(plan, 0.0, seed=9) == []
    assert [t.to_json_obj() for t in plan.transactions] == before


def test_injection_corrupts_only_credit_operands():
    plan = _plan({TxType.TYPE1: 80, TxType.TYPE2: 40, TxType.TYPE4: 30})
    injected = inject_invalid_addresses(plan, 1.0, seed=9)
    by_id = {t.id: t for t in plan.transactions}
    queries = [t.id for t in plan.transactions
               if not any(op.access is AccessType.WRITE for op in t.operands)]
    assert set(injected).isdisjoint(queries), "queries have no credit to corrupt"
    grammar_bad = 0
    for tx_id in injected:
        tx = by_id[tx_id]
        bogus = [op for op in tx.operands
                 if op.addr.startswith(("W-void", "!bad-"))]
        assert len(bogus) == 1
        assert bogus[0].access is AccessType.WRITE and bogus[0].amount > 0
        if not is_wellformed_address(bogus[0].addr):
            grammar_bad += 1
    # the corruption mixes well-formed-unknown and malformed addresses
    assert 0 < grammar_bad < len(injected)


def test_injection_is_deterministic_per_seed():
    plan_a = _plan({TxType.TYPE1: 100})
    plan_b = _plan({TxType.TYPE1: 100})
    ids_a = inject_invalid_addresses(plan_a, 0.2, seed=4)
    ids_b = inject_invalid_addresses(plan_b, 0.2, seed=4)
    assert ids_a == ids_b
    assert [t.to_json_obj() for t in plan_a.transactions] == \
        [t.to_json_obj() for t in plan_b.transactions]
