"""Deterministic virtual-clock discrete-event engine.

One tick is one millisecond of simulated time.  A single min-heap drives
every pipeline stage; equal-time events fire in scheduling order, which makes
a run a pure function of (scenario, workload).  Service durations come from
seeded lognormal models with one named RNG stream per stage, so adding draws
to one stage never perturbs another.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .assigner import (
    GATE_DEFER,
    GATE_DROP,
    GATE_OK,
    ChannelPool,
    TransactionAssigner,
)
from .config import ScenarioConfig
from .dependency import analyze_dependency, classify_operands
from .endorsement import (
    Endorsement,
    StateView,
    collect_endorsements,
    execute_speculatively,
)
from .ledger import (
    Block,
    FailReason,
    ReadWriteSet,
    Transaction,
    TxStatus,
    ValidationKind,
    WorldState,
    validate_read_set,
)
from .locks import InvariantViolation
from .strategies import (
    CommitSerializer,
    OrdererChannel,
    Strategy,
    WindowBuffer,
    commit_block,
)
from .workload import (
    ClosedLoop,
    WorkloadPlan,
    generate_workload,
    inject_invalid_addresses,
)

log = logging.getLogger(__name__)


class StallDetected(RuntimeError):
    """The event loop ran dry (or idled) while transactions were unfinished."""


class EventKind(Enum):
    SUBMIT = "Submit"
    ENDORSE_DONE = "EndorseDone"
    ANALYZE_DONE = "AnalyzeDone"
    ASSIGN_TICK = "AssignTick"
    WINDOW_FLUSH = "WindowFlush"
    ORDER_DONE = "OrderDone"
    BLOCK_CUT = "BlockCut"
    COMMIT_DONE = "CommitDone"
    WALLET_FLAP = "WalletFlap"


@dataclass(frozen=True)
class Event:
    fire_at: int
    seq: int
    kind: EventKind
    payload: object = None


class EventQueue:
    """Min-heap by (fire_at, seq); FIFO among equal fire times."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, fire_at: int, kind: EventKind, payload: object = None) -> Event:
        ev = Event(fire_at, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def next_event(self) -> Event | None:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[2]


class ServiceTimeModel:
    """Seeded lognormal stage costs, one independent RNG stream per stage."""

    def __init__(self, seed: int, medians: dict[str, int], sigma: float):
        self.medians = dict(medians)
        self.sigma = sigma
        self._streams = {
            stage: random.Random(f"{seed}:svc:{stage}") for stage in self.medians
        }

    def sample(self, stage: str) -> int:
        rng = self._streams[stage]
        value = self.medians[stage] * math.exp(self.sigma * rng.gauss(0.0, 1.0))
        return max(1, round(value))


@dataclass(frozen=True)
class TraceRecord:
    """One status transition; the trace is the ground truth for metrics."""

    tx_id: int
    frm: str | None
    to: str
    tick: int
    channel_id: int | None
    reason: str | None
    tx_type: str

    def to_json_obj(self) -> dict:
        obj = {"txId": self.tx_id, "from": self.frm, "to": self.to, "tick": self.tick}
        if self.channel_id is not None:
            obj["channelId"] = self.channel_id
        if self.reason is not None:
            obj["reason"] = self.reason
        obj["txType"] = self.tx_type
        return obj

    @staticmethod
    def from_json_obj(obj: dict) -> "TraceRecord":
        return TraceRecord(
            tx_id=int(obj["txId"]),
            frm=obj.get("from"),
            to=obj["to"],
            tick=int(obj["tick"]),
            channel_id=obj.get("channelId"),
            reason=obj.get("reason"),
            tx_type=obj["txType"],
        )


class HybridView:
    """Endorser's world: lagged balances and versions, live availability.

    Balance and version come from the block-boundary snapshot the endorser
    has caught up to; availability is an operational signal observed at
    execution time, not ledger state.
    """

    __slots__ = ("_snapshot", "_world", "height")

    def __init__(self, height: int, snapshot: dict, world: WorldState):
        self._snapshot = snapshot
        self._world = world
        self.height = height

    def get(self, addr: str) -> tuple[int, int, bool] | None:
        entry = self._snapshot.get(addr)
        if entry is None:
            return None
        live = self._world.wallets.get(addr)
        available = live.available if live is not None else entry[2]
        return (entry[0], entry[1], available)


class SimResult:
    def __init__(
        self,
        trace: list[TraceRecord],
        blocks: list[Block],
        final_state: WorldState,
        genesis_json: dict,
        end_tick: int,
    ):
        self.trace = trace
        self.blocks = blocks
        self.final_state = final_state
        self.genesis_json = genesis_json
        self.end_tick = end_tick


_TERMINAL = (TxStatus.COMMITTED, TxStatus.FAILED, TxStatus.DISCARDED)


class Simulation:
    def __init__(self, cfg: ScenarioConfig, plan: WorkloadPlan):
        self.cfg = cfg
        self.plan = plan
        self.now = 0
        self.events = EventQueue()
        self.trace: list[TraceRecord] = []
        self.blocks: list[Block] = []
        self.rwsets: dict[int, ReadWriteSet] = {}
        self.total_txs = len(plan.transactions)
        self.terminal_count = 0
        self.last_progress = 0

        self.world = WorldState()
        for addr, balance in plan.genesis_balances.items():
            self.world.add_wallet(addr, balance)
        self.genesis_json = self.world.to_json_obj()

        self.model = ServiceTimeModel(cfg.seed, cfg.service_times, cfg.sigma)
        self.lag_rng = random.Random(f"{cfg.seed}:lag")
        self.snapshots: list[tuple[int, dict]] = [(0, self.world.snapshot_view())]

        # endorsement worker pool
        self.endorse_busy = 0
        self.endorse_backlog: deque[Transaction] = deque()
        self.active_endorsements: dict[int, frozenset[str]] = {}

        # dependency-analysis worker pool (sized to the channel count)
        self.manager_workers = cfg.channel_count if cfg.dependency_manager_enabled else 0
        self.manager_busy = 0
        self.manager_backlog: deque[Transaction] = deque()

        strategy = cfg.strategy
        self.channels = [
            OrdererChannel(i, cfg.block_size, cfg.batch_timeout, cfg.queue_limit,
                           idle_cut=cfg.idle_cut)
            for i in range(cfg.channel_count)
        ]
        self.assigner: TransactionAssigner | None = None
        if strategy.uses_locks:
            self.assigner = TransactionAssigner(
                ChannelPool(cfg.channel_count, cfg.queue_limit),
                scan_window=cfg.scan_window,
                exclusive_read_locks=cfg.exclusive_read_locks,
            )
        self.window: WindowBuffer | None = None
        if strategy.uses_window:
            self.window = WindowBuffer(strategy, sync_delay=cfg.sync_delay)
        self.staging: list[tuple[Transaction, ReadWriteSet]] = []
        self.staging_head = 0

        self.serializer = CommitSerializer()
        self.batch_seq = 0
        self._assign_tick_at = -1

        self.flappable = plan.config.flappable_wallet
        self.stall_limit = max(
            200_000,
            100 * cfg.batch_timeout,
            20 * (cfg.flap.period if cfg.flap else 0),
        )

        # closed-loop bookkeeping: workload slots (a Type2 pair is one slot)
        self.slots: list[list[Transaction]] = []
        self.next_slot = 0
        self.slot_of: dict[int, int] = {}
        self.slot_remaining: dict[int, int] = {}
        if isinstance(plan.config.arrival, ClosedLoop):
            txs = plan.transactions
            i = 0
            while i < len(txs):
                tx = txs[i]
                if (
                    tx.tx_type.value == "Type2"
                    and i + 1 < len(txs)
                    and txs[i + 1].tx_type.value == "Type2"
                    and txs[i + 1].id == tx.id + 1
                ):
                    self.slots.append([tx, txs[i + 1]])
                    i += 2
                else:
                    self.slots.append([tx])
                    i += 1
            for idx, slot in enumerate(self.slots):
                for tx in slot:
                    self.slot_of[tx.id] = idx
                self.slot_remaining[idx] = len(slot)

    # ---------------------------------------------------------------- trace

    def _record(self, tx: Transaction, frm: TxStatus | None, to: TxStatus,
                reason: FailReason | None = None, channel: int | None = None) -> None:
        self.trace.append(TraceRecord(
            tx_id=tx.id,
            frm=frm.value if frm else None,
            to=to.value,
            tick=self.now,
            channel_id=channel,
            reason=reason.value if reason else None,
            tx_type=tx.tx_type.value,
        ))
        self.last_progress = self.now

    def _move(self, tx: Transaction, to: TxStatus,
              reason: FailReason | None = None, channel: int | None = None) -> None:
        frm = tx.status
        tx.advance(to)
        self._record(tx, frm, to, reason=reason, channel=channel)
        if to in _TERMINAL:
            self.terminal_count += 1
            self._on_terminal(tx)

    def _on_terminal(self, tx: Transaction) -> None:
        if not self.slots:
            return
        idx = self.slot_of[tx.id]
        self.slot_remaining[idx] -= 1
        if self.slot_remaining[idx] == 0 and self.next_slot < len(self.slots):
            for queued_tx in self.slots[self.next_slot]:
                self.events.schedule(self.now, EventKind.SUBMIT, queued_tx)
            self.next_slot += 1

    # ----------------------------------------------------------------- run

    def run(self) -> SimResult:
        self._schedule_initial()
        while True:
            if self.terminal_count >= self.total_txs:
                break
            ev = self.events.next_event()
            if ev is None:
                self._raise_stall("event queue ran dry")
            if ev.fire_at < self.now:
                raise InvariantViolation(
                    f"time went backwards: {ev.fire_at} < {self.now}")
            self.now = ev.fire_at
            if self.now - self.last_progress > self.stall_limit:
                self._raise_stall(f"no progress for {self.stall_limit} ticks")
            self._dispatch(ev)
        return SimResult(
            trace=self.trace,
            blocks=self.blocks,
            final_state=self.world,
            genesis_json=self.genesis_json,
            end_tick=self.now,
        )

    def _raise_stall(self, why: str) -> None:
        stuck = [
            tx.id for tx in self.plan.transactions
            if tx.status not in _TERMINAL
        ][:10]
        raise StallDetected(
            f"{why} at tick {self.now}; "
            f"{self.total_txs - self.terminal_count} unfinished, first ids {stuck}"
        )

    def _schedule_initial(self) -> None:
        if self.slots:
            clients = self.plan.config.arrival.clients
            for slot in self.slots[:clients]:
                for tx in slot:
                    self.events.schedule(0, EventKind.SUBMIT, tx)
            self.next_slot = min(clients, len(self.slots))
        else:
            for tx in self.plan.transactions:
                if tx.submit_time < 0:
                    raise InvariantViolation(f"tx {tx.id} has no submit time")
                self.events.schedule(tx.submit_time, EventKind.SUBMIT, tx)
        if self.window is not None and self.total_txs:
            self.events.schedule(self.cfg.reorder_window, EventKind.WINDOW_FLUSH)
        if self.cfg.flap and self.flappable in self.world.wallets and self.total_txs:
            first_down = self.cfg.flap.period - self.cfg.flap.down
            self.events.schedule(max(1, first_down), EventKind.WALLET_FLAP, True)

    def _dispatch(self, ev: Event) -> None:
        kind = ev.kind
        if kind is EventKind.SUBMIT:
            self._on_submit(ev.payload)
        elif kind is EventKind.ENDORSE_DONE:
            self._on_endorse_done(ev.payload)
        elif kind is EventKind.ANALYZE_DONE:
            self._on_analyze_done(ev.payload)
        elif kind is EventKind.ASSIGN_TICK:
            self._on_assign_tick()
        elif kind is EventKind.WINDOW_FLUSH:
            self._on_window_flush()
        elif kind is EventKind.ORDER_DONE:
            self._on_order_done(ev.payload)
        elif kind is EventKind.BLOCK_CUT:
            self._on_block_cut(ev.payload)
        elif kind is EventKind.COMMIT_DONE:
            self._on_commit_done(ev.payload)
        elif kind is EventKind.WALLET_FLAP:
            self._on_wallet_flap(ev.payload)
        else:  # pragma: no cover - exhaustive
            raise AssertionError(kind)

    # ------------------------------------------------------------ endorse

    def _on_submit(self, tx: Transaction) -> None:
        if tx.submit_time < 0:
            tx.submit_time = tx.timestamp = self.now
        self._record(tx, None, TxStatus.PENDING)
        self._start_endorse(tx)

    def _start_endorse(self, tx: Transaction) -> None:
        if self.endorse_busy >= self.cfg.endorse_workers:
            self.endorse_backlog.append(tx)
            return
        self.endorse_busy += 1
        wallets = frozenset(tx.wallet_addresses())
        overlap = 0
        if self.cfg.hot_key_coefficient > 0.0:
            overlap = sum(1 for s in self.active_endorsements.values() if s & wallets)
        self.active_endorsements[tx.id] = wallets
        duration = self.model.sample("endorse")
        if overlap:
            duration = max(1, round(duration * (1 + self.cfg.hot_key_coefficient * overlap)))
        self.events.schedule(self.now + duration, EventKind.ENDORSE_DONE, tx)

    def _on_endorse_done(self, tx: Transaction) -> None:
        del self.active_endorsements[tx.id]
        self.endorse_busy -= 1
        if self.endorse_backlog:
            self._start_endorse(self.endorse_backlog.popleft())

        endorsements = []
        newest = len(self.snapshots) - 1
        for endorser_id in range(self.cfg.policy.endorsers):
            lag = self.lag_rng.randint(0, self.cfg.max_lag)
            height, snapshot = self.snapshots[max(0, newest - lag)]
            view = HybridView(height, snapshot, self.world)
            endorsements.append(
                Endorsement(endorser_id, height, execute_speculatively(tx, view))
            )
        decision = collect_endorsements(tx, self.cfg.policy, endorsements)

        if decision.rwset is None:
            self._move(tx, TxStatus.FAILED, reason=decision.reason)
            return
        self.rwsets[tx.id] = decision.rwset
        self._move(tx, TxStatus.ENDORSED)

        if tx.tx_type.is_query:
            self._commit_query(tx)
        elif self.manager_workers:
            self._start_analysis(tx)
        else:
            self._route_unanalyzed(tx)

    def _commit_query(self, tx: Transaction) -> None:
        """Balance queries answer from current state without entering ordering."""
        check = validate_read_set(self.world, self.rwsets[tx.id])
        if check.valid:
            self._move(tx, TxStatus.COMMITTED)
        elif check.kind is ValidationKind.UNKNOWN_ADDRESS:
            self._move(tx, TxStatus.FAILED, reason=FailReason.UNKNOWN_ADDRESS)
        else:
            self._move(tx, TxStatus.FAILED, reason=FailReason.STALE)

    # ------------------------------------------------------------ analyze

    def _start_analysis(self, tx: Transaction) -> None:
        if self.manager_busy >= self.manager_workers:
            self.manager_backlog.append(tx)
            return
        self.manager_busy += 1
        self.events.schedule(
            self.now + self.model.sample("analyze"), EventKind.ANALYZE_DONE, tx)

    def _on_analyze_done(self, tx: Transaction) -> None:
        self.manager_busy -= 1
        if self.manager_backlog:
            self._start_analysis(self.manager_backlog.popleft())
        result = analyze_dependency(tx, self.world)
        if result.discarded:
            self._move(tx, TxStatus.DISCARDED, reason=result.discard_reason)
            return
        self._move(tx, TxStatus.ANALYZED)
        self._route_analyzed(tx)

    def _route_unanalyzed(self, tx: Transaction) -> None:
        """Manager disabled: lock strategies classify inline, others skip it."""
        if self.cfg.strategy.uses_locks:
            annotation = classify_operands(tx)
            tx.read_wallets = list(annotation.read_wallets)
            tx.write_wallets = list(annotation.write_wallets)
            self._move(tx, TxStatus.ANALYZED)
        self._route_analyzed(tx)

    def _route_analyzed(self, tx: Transaction) -> None:
        rwset = self.rwsets[tx.id]
        if self.cfg.strategy.uses_locks:
            assert not self.assigner.locks.held_by(tx.id), "queued tx holds locks"
            self.assigner.queue.push(tx)
            self._move(tx, TxStatus.QUEUED)
            self._schedule_assign_tick()
        elif self.window is not None:
            self.window.add(self.now, tx, rwset)
        else:
            self.staging.append((tx, rwset))
            self._admit_staged()

    # ------------------------------------------------------------- assign

    def _schedule_assign_tick(self) -> None:
        if self._assign_tick_at != self.now:
            self._assign_tick_at = self.now
            self.events.schedule(self.now, EventKind.ASSIGN_TICK)

    def _on_assign_tick(self) -> None:
        self._assign_tick_at = -1
        if self.assigner is not None:
            self.assigner.drain_queue(gate=self._dispatch_gate,
                                      on_assigned=self._on_assigned)

    def _dispatch_gate(self, tx: Transaction) -> str:
        """Fresh execution against live state just before locks are taken."""
        result = execute_speculatively(tx, StateView.of(self.world))
        if result.ok:
            self.rwsets[tx.id] = result.rwset
            return GATE_OK
        if result.error is FailReason.UNAVAILABLE and self.cfg.defer_unavailable:
            return GATE_DEFER
        self._move(tx, TxStatus.FAILED, reason=result.error)
        return GATE_DROP

    def _on_assigned(self, tx: Transaction) -> None:
        channel = self.channels[tx.channel_id]
        self._move(tx, TxStatus.ORDERING, channel=tx.channel_id)
        channel.admit(tx, self.rwsets[tx.id])
        self._kick_channel(channel)

    # -------------------------------------------------------------- order

    def _on_window_flush(self) -> None:
        for tx, rwset in self.window.flush(self.now):
            self.staging.append((tx, rwset))
        self._admit_staged()
        if self.terminal_count < self.total_txs:
            self.events.schedule(self.now + self.cfg.reorder_window,
                                 EventKind.WINDOW_FLUSH)

    def _admit_staged(self) -> None:
        channel = self.channels[0]
        while self.staging_head < len(self.staging) and channel.has_space:
            tx, rwset = self.staging[self.staging_head]
            self.staging_head += 1
            self._move(tx, TxStatus.QUEUED)
            channel.admit(tx, rwset)
            self._kick_channel(channel)
        if self.staging_head and self.staging_head == len(self.staging):
            self.staging.clear()
            self.staging_head = 0

    def _kick_channel(self, channel: OrdererChannel) -> None:
        started = channel.start_service()
        if started is None:
            return
        tx, _ = started
        if tx.status is not TxStatus.ORDERING:
            tx.channel_id = channel.id
            self._move(tx, TxStatus.ORDERING, channel=channel.id)
        self.events.schedule(
            self.now + self.model.sample("order"), EventKind.ORDER_DONE, channel.id)

    def _on_order_done(self, channel_id: int) -> None:
        channel = self.channels[channel_id]
        opened = channel.finish_service(self.now)
        if opened:
            self.events.schedule(
                self.now + self.cfg.batch_timeout, EventKind.BLOCK_CUT, channel_id)
        if channel.should_cut(self.now):
            self.events.schedule(self.now, EventKind.BLOCK_CUT, channel_id)
        self._kick_channel(channel)

    def _on_block_cut(self, channel_id: int) -> None:
        channel = self.channels[channel_id]
        cut_any = False
        while channel.should_cut(self.now):
            batch = channel.take_cut(self.now, self.batch_seq)
            self.batch_seq += 1
            cut_any = True
            if self.assigner is not None:
                for _ in batch.txs:
                    self.assigner.channels.leave(channel_id)
                pool_count = self.assigner.channels.channels[channel_id].in_flight
                if pool_count != channel.occupancy:
                    raise InvariantViolation(
                        f"channel {channel_id} capacity drift: "
                        f"assigner {pool_count} vs orderer {channel.occupancy}")
            self.serializer.push(batch)
            self.last_progress = self.now
        if not cut_any:
            return
        self._pump_commits()
        if self.assigner is not None:
            self._schedule_assign_tick()
        else:
            self._admit_staged()

    # ------------------------------------------------------------- commit

    def _pump_commits(self) -> None:
        if self.serializer.busy:
            return
        batch = self.serializer.pop()
        if batch is None:
            return
        self.serializer.busy = True
        self.events.schedule(
            self.now + self.model.sample("validate"), EventKind.COMMIT_DONE, batch)

    def _on_commit_done(self, batch) -> None:
        block, outcomes = commit_block(self.world, batch)
        self.blocks.append(block)
        self.snapshots.append((self.world.height, self.world.snapshot_view()))
        if len(self.snapshots) > self.cfg.max_lag + 1:
            del self.snapshots[0]
        for outcome in outcomes:
            tx = outcome.tx
            if self.assigner is not None:
                self.assigner.release_locks(tx)
            if outcome.committed:
                self._move(tx, TxStatus.COMMITTED, channel=tx.channel_id)
            else:
                self._move(tx, TxStatus.FAILED, reason=outcome.reason,
                           channel=tx.channel_id)
        self.serializer.busy = False
        self._pump_commits()
        if self.assigner is not None:
            self._schedule_assign_tick()

    # --------------------------------------------------------------- flap

    def _on_wallet_flap(self, going_down: bool) -> None:
        wallet = self.world.wallets[self.flappable]
        wallet.available = not going_down
        log.debug("wallet %s %s at %d", self.flappable,
                  "down" if going_down else "up", self.now)
        if not going_down:
            self._schedule_assign_tick()
        if self.terminal_count < self.total_txs:
            gap = self.cfg.flap.down if going_down else self.cfg.flap.period - self.cfg.flap.down
            self.events.schedule(self.now + gap, EventKind.WALLET_FLAP, not going_down)


def prepare_plan(cfg: ScenarioConfig) -> tuple[WorkloadPlan, list[int]]:
    """Generate the scenario's workload, applying fault injection if asked."""
    plan = generate_workload(cfg.workload)
    injected: list[int] = []
    if cfg.invalid_rate > 0.0:
        injected = inject_invalid_addresses(plan, cfg.invalid_rate, cfg.seed)
    return plan, injected


def run_simulation(cfg: ScenarioConfig, plan: WorkloadPlan) -> SimResult:
    return Simulation(cfg, plan).run()
