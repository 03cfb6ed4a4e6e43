"""Workload generation: the contention type catalog plus SmallBank-style baselines.

Six contention-generating transaction shapes hammer a small set of shared
accounts playing the roles A, B, C, D:

  Type1  debit A by x, credit B with ceil(x/2) and C with floor(x/2)
  Type2  a co-initiated pair: a balance query of C and a transfer B -> C,
         emitted with identical submit timestamps (query first)
  Type3  debit A, B and C independently, credit D with the sum
  Type4  credit A with 100 units from an external faucet (unbacked mint)
  Type5  debit A by 100 units into an external sink counterparty
  Type6  transfer A -> D where D is the wallet subject to availability flaps

With exactly four configured accounts the roles are the fixed wallets A-D;
with more accounts each instance samples its role wallets from the pool,
which spreads the contention without changing any per-type semantics.

Baselines run against pools disjoint from the contention accounts.  Baseline
writes and updates are funding transfers (create = move an opening balance
out of a float wallet, update = move between pool wallets) so that they
conserve total balance like the transfer-class contention types.  Only the
Type4 faucet changes the ledger sum, by exactly the credited amount.

Generated amounts are drawn as-is from the configured range; the generator
never sanitizes them against balances, so overdraft attempts are part of the
workload by construction.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .ledger import (
    AccessType,
    CANONICAL_TYPE_ORDER,
    Operand,
    TICKS_PER_SECOND,
    Transaction,
    TxType,
)

FAUCET_AMOUNT = 100

READ = AccessType.READ
WRITE = AccessType.WRITE


@dataclass(frozen=True)
class OpenLoop:
    """Fixed-rate arrivals, in transactions per simulated second."""

    rate_tps: float

    def submit_tick(self, index: int) -> int:
        return round(index * TICKS_PER_SECOND / self.rate_tps)


@dataclass(frozen=True)
class ClosedLoop:
    """A fixed client population; each client resubmits on completion."""

    clients: int


@dataclass
class WorkloadConfig:
    seed: int
    counts: dict[TxType, int]
    accounts: list[str] = field(default_factory=lambda: ["W-A", "W-B", "W-C", "W-D"])
    initial_balance: int = 10_000
    arrival: OpenLoop | ClosedLoop = field(default_factory=lambda: OpenLoop(100.0))
    amount_range: tuple[int, int] | None = None
    read_pool: int = 64
    update_pool: int = 32
    float_pool: int = 16
    sink_pool: int = 8
    # Fraction of generated Type6 instances aimed at the flappable wallet.
    type6_unavailable_prob: float = 1.0

    def __post_init__(self) -> None:
        if self.amount_range is None:
            # Overdraft attempts land roughly half the time at this default.
            self.amount_range = (1, 2 * self.initial_balance)
        lo, hi = self.amount_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad amount range {self.amount_range}")
        if any(self.counts.get(t, 0) for t in CONTENTION_REQUIRING_ROLES):
            if len(self.accounts) < 4:
                raise ValueError("contention types need at least 4 accounts")
        if len(set(self.accounts)) != len(self.accounts):
            raise ValueError("duplicate account addresses")

    @property
    def flappable_wallet(self) -> str:
        """The account playing the outage-prone D role (fixed per workload)."""
        return self.accounts[3] if len(self.accounts) >= 4 else self.accounts[-1]


CONTENTION_REQUIRING_ROLES = [
    TxType.TYPE1,
    TxType.TYPE2,
    TxType.TYPE3,
    TxType.TYPE4,
    TxType.TYPE5,
    TxType.TYPE6,
]


def _pool(prefix: str, n: int) -> list[str]:
    return [f"W-{prefix}{i:04d}" for i in range(1, n + 1)]


class WorkloadPlan:
    """A generated workload: the transaction stream plus its genesis universe."""

    def __init__(self, config: WorkloadConfig, transactions: list[Transaction],
                 genesis_balances: dict[str, int]):
        self.config = config
        self.transactions = transactions
        self.genesis_balances = genesis_balances

    def fingerprint_obj(self) -> dict:
        cfg = self.config
        return {
            "seed": cfg.seed,
            "counts": {t.value: n for t, n in sorted(cfg.counts.items(), key=lambda kv: kv[0].value)},
            "accounts": cfg.accounts,
            "initialBalance": cfg.initial_balance,
            "amountRange": list(cfg.amount_range),
            "arrival": (
                {"model": "open", "rateTps": cfg.arrival.rate_tps}
                if isinstance(cfg.arrival, OpenLoop)
                else {"model": "closed", "clients": cfg.arrival.clients}
            ),
            "txCount": len(self.transactions),
        }


def generate_workload(config: WorkloadConfig) -> WorkloadPlan:
    """Produce the deterministic transaction stream for ``config``.

    The same config always yields the same ids, operands, amounts and submit
    times.  Type2 expands into two transactions per requested instance.
    """
    rng = random.Random(f"workload:{config.seed}")
    lo, hi = config.amount_range

    read_pool = _pool("r", config.read_pool)
    update_pool = _pool("u", config.update_pool)
    float_pool = _pool("f", config.float_pool)
    sink_pool = _pool("x", config.sink_pool)
    write_targets = _pool("w", config.counts.get(TxType.WRITE_BASELINE, 0))

    genesis: dict[str, int] = {}
    for addr in config.accounts:
        genesis[addr] = config.initial_balance
    if config.counts.get(TxType.READ_BASELINE, 0):
        for addr in read_pool:
            genesis[addr] = config.initial_balance
    if config.counts.get(TxType.UPDATE_BASELINE, 0):
        for addr in update_pool:
            genesis[addr] = config.initial_balance
    if config.counts.get(TxType.WRITE_BASELINE, 0):
        for addr in float_pool:
            genesis[addr] = config.initial_balance * config.counts[TxType.WRITE_BASELINE]
        for addr in write_targets:
            genesis[addr] = 0
    if config.counts.get(TxType.TYPE5, 0):
        for addr in sink_pool:
            genesis[addr] = 0

    # One arrival slot per instance; the type mix is shuffled so that types
    # interleave over time instead of arriving in blocks.
    slots: list[TxType] = []
    for tx_type in CANONICAL_TYPE_ORDER:
        slots.extend([tx_type] * config.counts.get(tx_type, 0))
    rng.shuffle(slots)

    contention = config.accounts
    flappable = config.flappable_wallet
    spread = [a for a in contention if a != flappable]

    def sample_roles(n: int) -> list[str]:
        if len(contention) == 4:
            return contention[:n]
        return rng.sample(contention, n)

    txs: list[Transaction] = []
    next_id = 1
    write_target_iter = iter(write_targets)

    for slot, tx_type in enumerate(slots):
        if tx_type is TxType.READ_BASELINE:
            addr = rng.choice(read_pool)
            ops = [Operand(addr, READ)]
        elif tx_type is TxType.WRITE_BASELINE:
            src = rng.choice(float_pool)
            dst = next(write_target_iter)
            x = rng.randint(lo, hi)
            ops = [Operand(src, WRITE, -x), Operand(dst, WRITE, x)]
        elif tx_type is TxType.UPDATE_BASELINE:
            src, dst = rng.sample(update_pool, 2)
            x = rng.randint(lo, hi)
            ops = [Operand(src, WRITE, -x), Operand(dst, WRITE, x)]
        elif tx_type is TxType.TYPE1:
            a, b, c = sample_roles(3)
            x = rng.randint(lo, hi)
            ops = [
                Operand(a, WRITE, -x),
                Operand(b, WRITE, math.ceil(x / 2)),
                Operand(c, WRITE, math.floor(x / 2)),
            ]
        elif tx_type is TxType.TYPE2:
            _, b, c = sample_roles(3)
            x = rng.randint(lo, hi)
            # Query first: under timestamp ordering the id tie-break places
            # the balance query ahead of its co-initiated transfer.
            query = Transaction(next_id, tx_type, [Operand(c, READ)])
            transfer = Transaction(
                next_id + 1, tx_type, [Operand(b, WRITE, -x), Operand(c, WRITE, x)]
            )
            txs.append(query)
            txs.append(transfer)
            next_id += 2
            continue
        elif tx_type is TxType.TYPE3:
            a, b, c, d = sample_roles(4)
            xs = [rng.randint(lo, hi) for _ in range(3)]
            ops = [
                Operand(a, WRITE, -xs[0]),
                Operand(b, WRITE, -xs[1]),
                Operand(c, WRITE, -xs[2]),
                Operand(d, WRITE, sum(xs)),
            ]
        elif tx_type is TxType.TYPE4:
            a = sample_roles(1)[0]
            ops = [Operand(a, WRITE, FAUCET_AMOUNT)]
        elif tx_type is TxType.TYPE5:
            a = sample_roles(1)[0]
            sink = rng.choice(sink_pool)
            ops = [Operand(a, WRITE, -FAUCET_AMOUNT), Operand(sink, WRITE, FAUCET_AMOUNT)]
        elif tx_type is TxType.TYPE6:
            a = contention[0] if len(contention) == 4 else rng.choice(spread)
            if rng.random() < config.type6_unavailable_prob:
                target = flappable
            else:
                target = rng.choice([w for w in spread if w != a])
            x = rng.randint(lo, hi)
            ops = [Operand(a, WRITE, -x), Operand(target, WRITE, x)]
        else:  # pragma: no cover - exhaustive over the enum
            raise AssertionError(tx_type)
        txs.append(Transaction(next_id, tx_type, ops))
        next_id += 1

    if isinstance(config.arrival, OpenLoop):
        slot_idx = 0
        i = 0
        while i < len(txs):
            tick = config.arrival.submit_tick(slot_idx)
            txs[i].submit_time = txs[i].timestamp = tick
            if (
                txs[i].tx_type is TxType.TYPE2
                and i + 1 < len(txs)
                and txs[i + 1].tx_type is TxType.TYPE2
                and txs[i + 1].id == txs[i].id + 1
            ):
                # The pair shares one arrival slot and one timestamp.
                txs[i + 1].submit_time = txs[i + 1].timestamp = tick
                i += 1
            slot_idx += 1
            i += 1
    # Closed-loop submit times are assigned by the engine at dispatch.

    return WorkloadPlan(config, txs, genesis)


def inject_invalid_addresses(
    plan: WorkloadPlan, rate: float, seed: int
) -> list[int]:
    """Corrupt the credit target of a fraction of transfer transactions.

    Models fat-fingered or unknown destination wallets.  Only credit operands
    are rewritten: a corrupted debit would already fail at execution, while a
    corrupted credit sails through speculative execution and must be caught
    either by dependency analysis or at commit.  Returns the affected tx ids.
    """
    rng = random.Random(f"inject:{seed}")
    injected: list[int] = []
    for tx in plan.transactions:
        candidates = [
            i for i, op in enumerate(tx.operands)
            if op.access is WRITE and op.amount > 0
        ]
        if not candidates or rng.random() >= rate:
            continue
        idx = rng.choice(candidates)
        old = tx.operands[idx]
        if rng.random() < 0.5:
            bogus = f"W-void{rng.randint(0, 9999):04d}"  # well-formed, unknown
        else:
            bogus = f"!bad-{rng.randint(0, 9999):04d}"  # grammar violation
        tx.operands[idx] = Operand(bogus, old.access, old.amount)
        injected.append(tx.id)
    return injected


def export_workload_jsonl(plan: WorkloadPlan, path: str) -> None:
    with open(path, "w") as fh:
        for tx in plan.transactions:
            fh.write(json.dumps(tx.to_json_obj()) + "\n")


def import_workload_jsonl(path: str) -> list[Transaction]:
    txs: list[Transaction] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                txs.append(Transaction.from_json_obj(json.loads(line)))
    return txs
