"""Core ledger types: wallets, transactions, read/write sets, blocks, world state.

The ledger is a flat key/value map of wallet address -> wallet record.  Every
wallet carries an integer balance (never negative once committed), a version
counter bumped on each committed write, and an availability flag that models
temporary outages.  Commit-time validation is optimistic: a transaction's
recorded read versions must still match the live state or the transaction is
rejected as stale.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

ADDRESS_RE = re.compile(r"^W-[A-Za-z0-9]+$")

# One simulated tick is one millisecond of virtual time.
TICKS_PER_SECOND = 1000


class AccessType(Enum):
    READ = "READ"
    WRITE = "WRITE"


class TxType(Enum):
    READ_BASELINE = "ReadBaseline"
    WRITE_BASELINE = "WriteBaseline"
    UPDATE_BASELINE = "UpdateBaseline"
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    TYPE3 = "Type3"
    TYPE4 = "Type4"
    TYPE5 = "Type5"
    TYPE6 = "Type6"

    @property
    def is_contention(self) -> bool:
        return self.value.startswith("Type")

    @property
    def is_query(self) -> bool:
        # Baseline reads are served on the query path and never enter
        # ordering; every other type is submitted for ordering.
        return self is TxType.READ_BASELINE


CONTENTION_TYPES = [t for t in TxType if t.is_contention]

CANONICAL_TYPE_ORDER = [
    TxType.READ_BASELINE,
    TxType.WRITE_BASELINE,
    TxType.UPDATE_BASELINE,
    TxType.TYPE1,
    TxType.TYPE2,
    TxType.TYPE3,
    TxType.TYPE4,
    TxType.TYPE5,
    TxType.TYPE6,
]


class TxStatus(Enum):
    PENDING = "Pending"
    ENDORSED = "Endorsed"
    ANALYZED = "Analyzed"
    QUEUED = "Queued"
    ORDERING = "Ordering"
    COMMITTED = "Committed"
    FAILED = "Failed"
    DISCARDED = "Discarded"


# Pipeline position of each status; transitions must be strictly monotone.
_STATUS_RANK = {
    TxStatus.PENDING: 0,
    TxStatus.ENDORSED: 1,
    TxStatus.ANALYZED: 2,
    TxStatus.QUEUED: 3,
    TxStatus.ORDERING: 4,
    TxStatus.COMMITTED: 5,
    TxStatus.FAILED: 5,
    TxStatus.DISCARDED: 5,
}

TERMINAL_STATUSES = frozenset({TxStatus.COMMITTED, TxStatus.FAILED, TxStatus.DISCARDED})


class FailReason(Enum):
    OVERDRAFT = "Overdraft"
    UNAVAILABLE = "Unavailable"
    UNKNOWN_ADDRESS = "UnknownAddress"
    MISMATCHED_RWSETS = "MismatchedRwSets"
    STALE = "Stale"
    INVALID_WALLET = "InvalidWallet"
    NOT_ENDORSED = "NotEndorsed"


class PipelineOrderError(Exception):
    """A transaction attempted to move backwards through the pipeline."""


class UnknownAddressError(KeyError):
    """A wallet address was looked up that does not exist in the state."""


def is_wellformed_address(addr: str) -> bool:
    return bool(ADDRESS_RE.match(addr))


@dataclass(frozen=True)
class Operand:
    """One wallet touched by a transaction.

    ``amount`` is a signed integer delta in asset units: debits are negative,
    credits positive, and zero for pure reads.  A transaction whose operand
    amounts do not sum to zero moves value in or out of the ledger (the
    external-credit case); all transfer-class transactions sum to zero.
    """

    addr: str
    access: AccessType
    amount: int = 0

    def to_json_obj(self) -> dict:
        return {"addr": self.addr, "access": self.access.value, "amount": self.amount}

    @staticmethod
    def from_json_obj(obj: dict) -> "Operand":
        return Operand(obj["addr"], AccessType(obj["access"]), int(obj["amount"]))


@dataclass
class Transaction:
    id: int
    tx_type: TxType
    operands: list[Operand]
    submit_time: int = -1
    timestamp: int = -1
    read_wallets: list[str] = field(default_factory=list)
    write_wallets: list[str] = field(default_factory=list)
    channel_id: int | None = None
    status: TxStatus = TxStatus.PENDING

    def wallet_addresses(self) -> list[str]:
        """Distinct operand addresses in first-appearance order."""
        seen: dict[str, None] = {}
        for op in self.operands:
            seen.setdefault(op.addr, None)
        return list(seen)

    def advance(self, status: TxStatus) -> None:
        if _STATUS_RANK[status] <= _STATUS_RANK[self.status]:
            raise PipelineOrderError(
                f"tx {self.id}: illegal transition {self.status.value} -> {status.value}"
            )
        self.status = status

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "txType": self.tx_type.value,
            "operands": [op.to_json_obj() for op in self.operands],
            "submitTime": self.submit_time,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "Transaction":
        return Transaction(
            id=int(obj["id"]),
            tx_type=TxType(obj["txType"]),
            operands=[Operand.from_json_obj(o) for o in obj["operands"]],
            submit_time=int(obj["submitTime"]),
            timestamp=int(obj["timestamp"]),
        )


@dataclass(frozen=True)
class ReadWriteSet:
    """Speculative execution result: observed versions plus intended balances.

    Every written address also appears in ``reads``: a write is always
    derived from an observed prior state.  Reads of addresses absent from the
    executing snapshot record version 0; commit-time validation turns those
    into UnknownAddress failures unless the wallet appeared meanwhile.
    """

    reads: tuple[tuple[str, int], ...]
    writes: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        read_addrs = {a for a, _ in self.reads}
        for addr, _ in self.writes:
            if addr not in read_addrs:
                raise ValueError(f"write of {addr} without a matching read")

    def to_json_obj(self) -> dict:
        return {
            "reads": [[a, v] for a, v in self.reads],
            "writes": [[a, b] for a, b in self.writes],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ReadWriteSet":
        return ReadWriteSet(
            reads=tuple((a, int(v)) for a, v in obj["reads"]),
            writes=tuple((a, int(b)) for a, b in obj["writes"]),
        )


@dataclass
class Wallet:
    address: str
    balance: int
    version: int = 1
    available: bool = True

    def to_json_obj(self) -> dict:
        return {
            "balance": self.balance,
            "version": self.version,
            "available": self.available,
        }


class ValidationKind(Enum):
    VALID = "Valid"
    STALE = "Stale"
    UNKNOWN_ADDRESS = "UnknownAddress"


@dataclass(frozen=True)
class ValidationResult:
    kind: ValidationKind
    addrs: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return self.kind is ValidationKind.VALID


class WorldState:
    """The single logical ledger: wallet map plus committed block height."""

    def __init__(self, wallets: dict[str, Wallet] | None = None, height: int = 0):
        self.wallets: dict[str, Wallet] = wallets if wallets is not None else {}
        self.height = height

    def add_wallet(self, address: str, balance: int, available: bool = True) -> Wallet:
        if balance < 0:
            raise ValueError(f"negative opening balance for {address}")
        w = Wallet(address, balance, version=1, available=available)
        self.wallets[address] = w
        return w

    def total_balance(self) -> int:
        return sum(w.balance for w in self.wallets.values())

    def snapshot_view(self) -> dict[str, tuple[int, int, bool]]:
        """Cheap immutable-by-convention copy for lagged endorser snapshots."""
        return {
            a: (w.balance, w.version, w.available) for a, w in self.wallets.items()
        }

    def to_json_obj(self) -> dict:
        return {
            "height": self.height,
            "wallets": {a: w.to_json_obj() for a, w in sorted(self.wallets.items())},
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "WorldState":
        state = WorldState(height=int(obj["height"]))
        for addr, rec in obj["wallets"].items():
            state.wallets[addr] = Wallet(
                address=addr,
                balance=int(rec["balance"]),
                version=int(rec["version"]),
                available=bool(rec["available"]),
            )
        return state


def validate_read_set(state: WorldState, rwset: ReadWriteSet) -> ValidationResult:
    """Check every recorded read version against the live state.

    Unknown addresses take precedence over staleness: a read of a wallet that
    does not exist signals an upstream validation gap, not a version race.
    """
    unknown: list[str] = []
    stale: list[str] = []
    for addr, version in rwset.reads:
        wallet = state.wallets.get(addr)
        if wallet is None:
            unknown.append(addr)
        elif wallet.version != version:
            stale.append(addr)
    if unknown:
        return ValidationResult(ValidationKind.UNKNOWN_ADDRESS, tuple(unknown))
    if stale:
        return ValidationResult(ValidationKind.STALE, tuple(stale))
    return ValidationResult(ValidationKind.VALID)


def apply_write_set(state: WorldState, rwset: ReadWriteSet) -> WorldState:
    """Apply intended balances; each written wallet's version advances by one.

    The caller is responsible for validating first.  Balances in a validated
    write set are never negative because execution rejects overdrafts.
    """
    for addr, balance in rwset.writes:
        wallet = state.wallets.get(addr)
        if wallet is None:
            raise UnknownAddressError(addr)
        if balance < 0:
            raise ValueError(f"write would leave {addr} negative")
        wallet.balance = balance
        wallet.version += 1
    return state


@dataclass
class Block:
    """An ordered batch cut by one channel; height is global and gap-free."""

    height: int
    channel_id: int
    txs: list[tuple[Transaction, ReadWriteSet]]
    cut_time: int

    def __post_init__(self) -> None:
        if not self.txs:
            raise ValueError("empty block")

    def to_json_obj(self) -> dict:
        return {
            "height": self.height,
            "channelId": self.channel_id,
            "cutTime": self.cut_time,
            "txs": [
                {"txId": tx.id, "txType": tx.tx_type.value, **rwset.to_json_obj()}
                for tx, rwset in self.txs
            ],
        }
