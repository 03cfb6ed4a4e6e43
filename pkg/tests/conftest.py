"""Shared fixtures and the randomized mini-scenario generator.

Mini scenarios are tiny self-contained worlds (2-8 wallets, 2-50
transactions) built directly as transaction objects, bypassing the workload
generator, so the property suites can hammer the pipeline across thousands
of seeds quickly.
"""

from __future__ import annotations

import math
import random

import pytest

from ledgersim.config import ScenarioConfig
from ledgersim.endorsement import EndorsementPolicy
from ledgersim.engine import SimResult, Simulation
from ledgersim.ledger import AccessType, Operand, Transaction, TxType
from ledgersim.strategies import Strategy
from ledgersim.workload import OpenLoop, WorkloadConfig, WorkloadPlan

MINI_SERVICE_TIMES = {"endorse": 2, "analyze": 2, "order": 3, "validate": 1}


def mini_scenario(seed: int) -> tuple[ScenarioConfig, WorkloadPlan]:
    """One randomized small scenario; same seed always rebuilds it identically."""
    rng = random.Random(f"mini:{seed}")
    wallet_count = rng.randint(2, 8)
    tx_count = rng.randint(2, 50)
    wallets = [f"W-m{i}" for i in range(1, wallet_count + 1)]
    genesis = {w: rng.randint(50, 500) for w in wallets}

    txs: list[Transaction] = []
    rate = rng.choice([100, 200, 400])
    for i in range(tx_count):
        submit = i * 1000 // rate
        roll = rng.random()
        if roll < 0.20:
            ops = [Operand(rng.choice(wallets), AccessType.READ, 0)]
            tx_type = TxType.READ_BASELINE
        elif roll < 0.35:
            ops = [Operand(rng.choice(wallets), AccessType.WRITE, 100)]
            tx_type = TxType.TYPE4
        elif roll < 0.85:
            src, dst = rng.sample(wallets, 2)
            amount = rng.randint(1, 120)
            ops = [
                Operand(src, AccessType.WRITE, -amount),
                Operand(dst, AccessType.WRITE, amount),
            ]
            tx_type = TxType.UPDATE_BASELINE
        else:
            if wallet_count >= 3:
                a, b, c = rng.sample(wallets, 3)
            else:
                a, b = rng.sample(wallets, 2)
                c = b
            amount = rng.randint(2, 90)
            ops = [
                Operand(a, AccessType.WRITE, -amount),
                Operand(b, AccessType.WRITE, math.ceil(amount / 2)),
                Operand(c, AccessType.WRITE, amount // 2),
            ]
            tx_type = TxType.TYPE1
        txs.append(Transaction(
            id=i, tx_type=tx_type, operands=ops, submit_time=submit, timestamp=submit,
        ))

    use_lock_head = seed % 4 == 3
    cfg = ScenarioConfig(
        seed=seed,
        strategy=Strategy.NAIVE_LOCKING if use_lock_head else Strategy.DEP_PARALLEL,
        workload=WorkloadConfig(seed=seed, counts={}, arrival=OpenLoop(float(rate))),
        policy=EndorsementPolicy(),
        channel_count=1 if use_lock_head else rng.randint(1, 4),
        queue_limit=rng.randint(2, 8),
        block_size=rng.randint(1, 5),
        batch_timeout=rng.randint(50, 500),
        service_times=dict(MINI_SERVICE_TIMES),
        max_lag=rng.choice([0, 1, 2]),
        endorse_workers=rng.randint(2, 4),
        flap=None,
        scan_window=1 if use_lock_head else 64,
        dependency_manager_enabled=not use_lock_head,
        idle_cut=not use_lock_head,
        defer_unavailable=not use_lock_head,
        exclusive_read_locks=seed % 7 == 0,
    )
    plan = WorkloadPlan(cfg.workload, txs, genesis)
    return cfg, plan


def run_mini(seed: int) -> tuple[Simulation, SimResult]:
    cfg, plan = mini_scenario(seed)
    sim = Simulation(cfg, plan)
    return sim, sim.run()


def records_by_tx(trace) -> dict[int, list]:
    out: dict[int, list] = {}
    for rec in trace:
        out.setdefault(rec.tx_id, []).append(rec)
    return out


def terminal_record(records):
    assert records, "transaction has no trace records"
    last = records[-1]
    assert last.to in ("Committed", "Failed", "Discarded")
    return last


@pytest.fixture
def four_wallet_genesis() -> dict[str, int]:
    return {"W-A": 100, "W-B": 0, "W-C": 0, "W-D": 50}
