"""Lock-aware transaction assignment onto parallel ordering channels.

The assigner owns the pending queue and the lock table.  A transaction is
assigned only when every wallet it depends on is lockable and a channel has
queue capacity; otherwise it keeps its queue position and is retried when a
commit releases locks or frees channel space.  Queue scans are bounded by a
window so one blocked head cannot starve unrelated traffic (a window of one
degenerates to strict head-of-line blocking).
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .ledger import Transaction
from .locks import InvariantViolation, LockTable

log = logging.getLogger(__name__)

DEFAULT_SCAN_WINDOW = 64


class AssignResult(Enum):
    ASSIGNED = "Assigned"
    REQUEUED = "Requeued"
    NO_CHANNEL = "NoChannel"


class PendingQueue:
    """FIFO of analyzed transactions awaiting assignment; no duplicate ids."""

    def __init__(self) -> None:
        self._txs: OrderedDict[int, Transaction] = OrderedDict()

    def __len__(self) -> int:
        return len(self._txs)

    def __contains__(self, tx_id: int) -> bool:
        return tx_id in self._txs

    def push(self, tx: Transaction) -> None:
        if tx.id in self._txs:
            raise InvariantViolation(f"tx {tx.id} queued twice")
        self._txs[tx.id] = tx

    def remove(self, tx_id: int) -> None:
        del self._txs[tx_id]

    def window(self, size: int) -> list[Transaction]:
        out = []
        for tx in self._txs.values():
            out.append(tx)
            if len(out) >= size:
                break
        return out


@dataclass
class Channel:
    """Capacity view of one ordering channel as the assigner sees it."""

    id: int
    queue_limit: int
    in_flight: int = 0

    @property
    def has_space(self) -> bool:
        return self.in_flight < self.queue_limit


class ChannelPool:
    def __init__(self, count: int, queue_limit: int):
        if count < 1:
            raise ValueError("at least one channel required")
        self.channels = [Channel(i, queue_limit) for i in range(count)]

    def pick(self) -> Channel | None:
        """Least-loaded channel with space; ties go to the lowest index."""
        best = None
        for ch in self.channels:
            if ch.has_space and (best is None or ch.in_flight < best.in_flight):
                best = ch
        return best

    def admit(self, channel_id: int) -> None:
        ch = self.channels[channel_id]
        if not ch.has_space:
            raise InvariantViolation(f"channel {channel_id} over capacity")
        ch.in_flight += 1

    def leave(self, channel_id: int) -> None:
        ch = self.channels[channel_id]
        if ch.in_flight <= 0:
            raise InvariantViolation(f"channel {channel_id} under-counted")
        ch.in_flight -= 1


# Gate verdicts: proceed with assignment, drop the transaction (it failed
# dispatch-time execution), or leave it queued for a later pass.
GATE_OK = "ok"
GATE_DROP = "drop"
GATE_DEFER = "defer"


class TransactionAssigner:
    def __init__(
        self,
        channels: ChannelPool,
        scan_window: int = DEFAULT_SCAN_WINDOW,
        exclusive_read_locks: bool = False,
    ):
        self.locks = LockTable()
        self.queue = PendingQueue()
        self.channels = channels
        self.scan_window = scan_window
        self.exclusive_read_locks = exclusive_read_locks

    def lock_sets(self, tx: Transaction) -> tuple[tuple[str, ...], tuple[str, ...]]:
        reads = tuple(tx.read_wallets)
        writes = tuple(tx.write_wallets)
        if self.exclusive_read_locks:
            return (), reads + writes
        return reads, writes

    def is_blocked(self, tx: Transaction) -> bool:
        reads, writes = self.lock_sets(tx)
        return not self.locks.can_acquire(reads, writes)

    def assign_transaction(self, tx: Transaction) -> AssignResult:
        """Atomic check-lock-and-place; on any obstacle the queue keeps the tx.

        A requeued or channel-starved transaction retains its original queue
        position and holds no locks.
        """
        if self.is_blocked(tx):
            if tx.id not in self.queue:
                self.queue.push(tx)
            return AssignResult.REQUEUED
        channel = self.channels.pick()
        if channel is None:
            if tx.id not in self.queue:
                self.queue.push(tx)
            return AssignResult.NO_CHANNEL
        reads, writes = self.lock_sets(tx)
        self.locks.acquire(tx.id, reads, writes)
        self.channels.admit(channel.id)
        if tx.id in self.queue:
            self.queue.remove(tx.id)
        tx.channel_id = channel.id
        log.debug("assign tx=%d channel=%d reads=%s writes=%s", tx.id, channel.id, reads, writes)
        return AssignResult.ASSIGNED

    def drop(self, tx: Transaction) -> None:
        """Remove a queued transaction that failed at the dispatch gate."""
        if tx.id in self.queue:
            self.queue.remove(tx.id)

    def release_locks(self, tx: Transaction) -> None:
        """Free a completed transaction's locks; double release is a bug."""
        self.locks.release(tx.id)
        log.debug("release tx=%d", tx.id)

    def drain_queue(
        self,
        gate: Callable[[Transaction], str] | None = None,
        on_assigned: Callable[[Transaction], None] | None = None,
    ) -> int:
        """Scan up to ``scan_window`` queued transactions and assign what fits.

        ``gate`` runs after the lock/capacity check but before locks are
        taken; it may drop the transaction (dispatch-time execution failure)
        or defer it.  Relative queue order is never disturbed.  Returns the
        number of transactions assigned.
        """
        assigned = 0
        while True:
            progress = False
            for tx in self.queue.window(self.scan_window):
                if self.is_blocked(tx):
                    continue
                if self.channels.pick() is None:
                    return assigned
                if gate is not None:
                    verdict = gate(tx)
                    if verdict == GATE_DROP:
                        self.queue.remove(tx.id)
                        progress = True
                        break
                    if verdict == GATE_DEFER:
                        continue
                result = self.assign_transaction(tx)
                if result is AssignResult.ASSIGNED:
                    assigned += 1
                    if on_assigned is not None:
                        on_assigned(tx)
                    progress = True
                    break
                if result is AssignResult.NO_CHANNEL:
                    return assigned
            if not progress:
                return assigned
