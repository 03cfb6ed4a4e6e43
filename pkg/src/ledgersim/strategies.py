"""Ordering strategies, channel mechanics, and block formation.

A strategy decides how endorsed transactions reach an ordering channel and in
what sequence: straight arrival order, reordered inside a periodic window (by
client timestamp or by operation class), or gated through the lock-aware
assigner (strict head-of-line, or windowed scanning over parallel channels).
The channel itself is the same everywhere: an admission-bounded queue in
front of a single-server orderer that feeds a block cutter.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .ledger import (
    AccessType,
    Block,
    FailReason,
    ReadWriteSet,
    Transaction,
    TxType,
    ValidationKind,
    WorldState,
    apply_write_set,
    validate_read_set,
)


class Strategy(Enum):
    DEFAULT_FIFO = "fifo"
    TIMESTAMPING = "timestamp"
    GROUPING = "grouping"
    NAIVE_LOCKING = "naive-locking"
    DEP_PARALLEL = "dep-parallel"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        for member in cls:
            if member.value == name:
                return member
        known = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown strategy {name!r} (expected one of: {known})")

    @property
    def uses_locks(self) -> bool:
        return self in (Strategy.NAIVE_LOCKING, Strategy.DEP_PARALLEL)

    @property
    def uses_manager(self) -> bool:
        return self is Strategy.DEP_PARALLEL

    @property
    def uses_window(self) -> bool:
        return self in (Strategy.TIMESTAMPING, Strategy.GROUPING)


# Operation classes for the grouping strategy, in emission priority order.
CLASS_READ = 0
CLASS_WRITE = 1
CLASS_UPDATE = 2

# Create-style types the client declares as pure writes; everything else
# with a write operand is a read-modify-write.
_WRITE_CLASS_TYPES = (TxType.WRITE_BASELINE, TxType.TYPE4)


def transaction_class(tx: Transaction) -> int:
    if not any(op.access is AccessType.WRITE for op in tx.operands):
        return CLASS_READ
    if tx.tx_type in _WRITE_CLASS_TYPES:
        return CLASS_WRITE
    return CLASS_UPDATE


class WindowBuffer:
    """Holds endorsed transactions between periodic flushes.

    Timestamping flushes in (timestamp, txId) order and only releases entries
    that have aged past the clock-sync allowance; grouping flushes in
    operation-class order (stable within a class) with no aging requirement.
    """

    def __init__(self, strategy: Strategy, sync_delay: int = 0):
        if not strategy.uses_window:
            raise ValueError(f"{strategy.value} does not buffer in a window")
        self.strategy = strategy
        self.sync_delay = sync_delay
        self._entries: list[tuple[int, int, Transaction, ReadWriteSet]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, now: int, tx: Transaction, rwset: ReadWriteSet) -> None:
        self._entries.append((now, self._seq, tx, rwset))
        self._seq += 1

    def flush(self, now: int) -> list[tuple[Transaction, ReadWriteSet]]:
        ripe = []
        rest = []
        for entry in self._entries:
            if now - entry[0] >= self.sync_delay:
                ripe.append(entry)
            else:
                rest.append(entry)
        self._entries = rest
        if self.strategy is Strategy.TIMESTAMPING:
            ripe.sort(key=lambda e: (e[2].timestamp, e[2].id))
        else:
            ripe.sort(key=lambda e: (transaction_class(e[2]), e[1]))
        return [(tx, rwset) for _, _, tx, rwset in ripe]


@dataclass
class CutBatch:
    """Transactions cut from one channel, awaiting serialized commit."""

    channel_id: int
    txs: list[tuple[Transaction, ReadWriteSet]]
    cut_time: int
    seq: int


class OrdererChannel:
    """Admission-bounded single-server ordering queue plus a block cutter.

    Blocks cut on size or on a timeout that starts when the first transaction
    enters an empty cutter.  With ``idle_cut`` the cutter also flushes the
    moment the channel has nothing left to order, so transactions holding
    locks do not sit waiting for unrelated traffic to fill a block.
    """

    def __init__(
        self,
        channel_id: int,
        block_size: int,
        block_timeout: int,
        queue_limit: int,
        idle_cut: bool = False,
    ):
        if block_size < 1 or queue_limit < 1 or block_timeout < 1:
            raise ValueError("block size, timeout, and queue limit must be positive")
        self.id = channel_id
        self.block_size = block_size
        self.block_timeout = block_timeout
        self.queue_limit = queue_limit
        self.idle_cut = idle_cut
        self.pending: deque[tuple[Transaction, ReadWriteSet]] = deque()
        self.in_service: tuple[Transaction, ReadWriteSet] | None = None
        self.cutter: list[tuple[Transaction, ReadWriteSet]] = []
        self.cutter_opened_at: int | None = None

    @property
    def occupancy(self) -> int:
        return len(self.pending) + (1 if self.in_service else 0) + len(self.cutter)

    @property
    def has_space(self) -> bool:
        return self.occupancy < self.queue_limit

    def admit(self, tx: Transaction, rwset: ReadWriteSet) -> None:
        if not self.has_space:
            raise OverflowError(f"channel {self.id} admission over queue limit")
        self.pending.append((tx, rwset))

    def start_service(self) -> tuple[Transaction, ReadWriteSet] | None:
        """Pop the next pending transaction into the orderer if it is free."""
        if self.in_service is not None or not self.pending:
            return None
        self.in_service = self.pending.popleft()
        return self.in_service

    def finish_service(self, now: int) -> bool:
        """Move the served transaction to the cutter.

        Returns True when this entry opened an empty cutter, which is the
        moment the cut timeout clock starts.
        """
        if self.in_service is None:
            raise RuntimeError(f"channel {self.id} has nothing in service")
        opened = not self.cutter
        self.cutter.append(self.in_service)
        self.in_service = None
        if opened:
            self.cutter_opened_at = now
        return opened

    def should_cut(self, now: int) -> bool:
        if not self.cutter:
            return False
        if len(self.cutter) >= self.block_size:
            return True
        if self.cutter_opened_at is not None and now - self.cutter_opened_at >= self.block_timeout:
            return True
        if self.idle_cut and self.in_service is None and not self.pending:
            return True
        return False

    def take_cut(self, now: int, seq: int) -> CutBatch:
        if not self.cutter:
            raise RuntimeError(f"channel {self.id} cut with empty cutter")
        taken = self.cutter[: self.block_size]
        self.cutter = self.cutter[self.block_size :]
        self.cutter_opened_at = now if self.cutter else None
        return CutBatch(channel_id=self.id, txs=taken, cut_time=now, seq=seq)


class CommitSerializer:
    """Orders cut batches from racing channels into one commit stream.

    Batches commit strictly one at a time, earliest cut first; ties between
    channels break toward the lower channel id.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, int, CutBatch]] = []
        self.busy = False

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, batch: CutBatch) -> None:
        heapq.heappush(self._heap, (batch.cut_time, batch.channel_id, batch.seq, batch))

    def pop(self) -> CutBatch | None:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[3]


@dataclass
class CommitOutcome:
    tx: Transaction
    committed: bool
    reason: FailReason | None = None


def commit_block(state: WorldState, batch: CutBatch) -> tuple[Block, list[CommitOutcome]]:
    """Validate and apply one cut batch against current state.

    Every transaction in the batch lands in the block regardless of outcome;
    multi-version validation decides, in block order, whether its write set
    applies or it fails as stale or addressing an unknown wallet.
    """
    outcomes = []
    for tx, rwset in batch.txs:
        check = validate_read_set(state, rwset)
        if check.kind is ValidationKind.VALID:
            apply_write_set(state, rwset)
            outcomes.append(CommitOutcome(tx, committed=True))
        elif check.kind is ValidationKind.UNKNOWN_ADDRESS:
            outcomes.append(CommitOutcome(tx, committed=False, reason=FailReason.UNKNOWN_ADDRESS))
        else:
            outcomes.append(CommitOutcome(tx, committed=False, reason=FailReason.STALE))
    state.height += 1
    block = Block(
        height=state.height,
        channel_id=batch.channel_id,
        txs=list(batch.txs),
        cut_time=batch.cut_time,
    )
    return block, outcomes
