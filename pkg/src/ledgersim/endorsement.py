"""Speculative execution against state snapshots and k-of-n endorsement.

Endorsers execute a transaction against possibly stale snapshots of the
committed state; each produces either a read/write set or an execution
error.  The client's endorsement succeeds only when enough endorsers agree
on the exact same read/write set.  Endorsers lagging at different heights
that observed different wallet versions therefore sink the transaction with
a mismatched-endorsement rejection, which is the race this stage exists to
reproduce.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .ledger import (
    AccessType,
    FailReason,
    ReadWriteSet,
    Transaction,
    WorldState,
)


class StateView:
    """Read-only wallet lookup used by speculative execution.

    Backed either by a frozen snapshot mapping or by the live world state
    (for execution at dispatch time, when the caller holds the locks).
    """

    __slots__ = ("_snapshot", "_state", "height")

    def __init__(self, snapshot: dict | None = None, state: WorldState | None = None,
                 height: int = 0):
        if (snapshot is None) == (state is None):
            raise ValueError("exactly one of snapshot/state required")
        self._snapshot = snapshot
        self._state = state
        self.height = state.height if state is not None else height

    @staticmethod
    def of(state: WorldState) -> "StateView":
        return StateView(state=state)

    def get(self, addr: str) -> tuple[int, int, bool] | None:
        """Return (balance, version, available) or None if absent."""
        if self._snapshot is not None:
            return self._snapshot.get(addr)
        w = self._state.wallets.get(addr)
        return None if w is None else (w.balance, w.version, w.available)


@dataclass(frozen=True)
class ExecResult:
    rwset: ReadWriteSet | None
    error: FailReason | None = None
    error_addr: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def execute_speculatively(tx: Transaction, view: StateView) -> ExecResult:
    """Run the transaction's operands against a snapshot.

    Debits of unknown wallets fail immediately (there is no balance to draw
    from); credits of unknown wallets are recorded optimistically with a
    version-0 read, deferring the existence check to commit.  Writes to
    wallets flagged unavailable are rejected at execution time, and any
    wallet left negative by the combined deltas is an overdraft.
    """
    reads: list[tuple[str, int]] = []
    balances: dict[str, int] = {}
    written: list[str] = []
    seen: set[str] = set()

    for op in tx.operands:
        entry = view.get(op.addr)
        if entry is None:
            if op.amount < 0:
                return ExecResult(None, FailReason.UNKNOWN_ADDRESS, op.addr)
            balance, version, available = 0, 0, True
        else:
            balance, version, available = entry
        if op.addr not in seen:
            seen.add(op.addr)
            reads.append((op.addr, version))
            balances[op.addr] = balance
        if op.access is AccessType.WRITE:
            if not available:
                return ExecResult(None, FailReason.UNAVAILABLE, op.addr)
            balances[op.addr] += op.amount
            if op.addr not in written:
                written.append(op.addr)

    for addr in written:
        if balances[addr] < 0:
            return ExecResult(None, FailReason.OVERDRAFT, addr)

    writes = tuple((addr, balances[addr]) for addr in written)
    return ExecResult(ReadWriteSet(tuple(reads), writes))


@dataclass(frozen=True)
class EndorsementPolicy:
    endorsers: int = 3
    required: int = 2

    def __post_init__(self) -> None:
        if not (1 <= self.required <= self.endorsers):
            raise ValueError("required must be within 1..endorsers")


@dataclass(frozen=True)
class Endorsement:
    endorser_id: int
    height: int
    result: ExecResult


class EndorseOutcome(Enum):
    ENDORSED = "Endorsed"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class EndorseDecision:
    outcome: EndorseOutcome
    rwset: ReadWriteSet | None = None
    reason: FailReason | None = None


def collect_endorsements(
    tx: Transaction, policy: EndorsementPolicy, endorsements: list[Endorsement]
) -> EndorseDecision:
    """Reduce individual endorser results to a single client-side decision.

    Endorsed requires at least ``required`` byte-identical read/write sets;
    with multiple agreeing groups the freshest snapshot wins.  Failing that,
    a quorum on one execution error kind surfaces that error; anything else
    is the mismatched-endorsement rejection.
    """
    if len(endorsements) != policy.endorsers:
        raise ValueError(
            f"tx {tx.id}: expected {policy.endorsers} endorsements, got {len(endorsements)}"
        )

    groups: dict[tuple, list[Endorsement]] = {}
    errors: dict[FailReason, int] = {}
    for e in endorsements:
        if e.result.ok:
            groups.setdefault((e.result.rwset.reads, e.result.rwset.writes), []).append(e)
        else:
            errors[e.result.error] = errors.get(e.result.error, 0) + 1

    quorums = [g for g in groups.values() if len(g) >= policy.required]
    if quorums:
        best = max(quorums, key=lambda g: (len(g), max(e.height for e in g)))
        return EndorseDecision(EndorseOutcome.ENDORSED, rwset=best[0].result.rwset)

    error_quorum = [
        (count, reason.value, reason)
        for reason, count in errors.items()
        if count >= policy.required
    ]
    if error_quorum:
        error_quorum.sort(reverse=True)
        return EndorseDecision(EndorseOutcome.REJECTED, reason=error_quorum[0][2])

    return EndorseDecision(EndorseOutcome.REJECTED, reason=FailReason.MISMATCHED_RWSETS)
