"""Dependency analysis: wallet classification and early validity filtering.

Runs after endorsement and before assignment.  Each operand wallet is
classified as a read or write dependency (a debit or credit is a write, a
balance query is a read; write subsumes read, so the two sets are disjoint).
Transactions referencing wallets that are malformed or absent from the
registry are discarded here instead of wasting an ordering slot and failing
at commit.

Availability is deliberately not checked: an unavailable wallet is valid but
unusable at execution time, which is the assigner's and executor's business.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ledger import (
    AccessType,
    FailReason,
    Transaction,
    TxStatus,
    WorldState,
    is_wellformed_address,
)


class NotEndorsedError(Exception):
    """A transaction reached dependency analysis without an endorsement."""


@dataclass(frozen=True)
class Annotation:
    read_wallets: tuple[str, ...]
    write_wallets: tuple[str, ...]


@dataclass(frozen=True)
class AnalysisResult:
    annotation: Annotation | None = None
    discard_reason: FailReason | None = None
    invalid_addr: str | None = None

    @property
    def discarded(self) -> bool:
        return self.discard_reason is not None


def is_valid_wallet(addr: str, registry: WorldState) -> bool:
    """Well-formed address and present in the registry; availability ignored."""
    return is_wellformed_address(addr) and addr in registry.wallets


def classify_operands(tx: Transaction) -> Annotation:
    writes: dict[str, None] = {}
    reads: dict[str, None] = {}
    for op in tx.operands:
        if op.access is AccessType.WRITE:
            writes.setdefault(op.addr, None)
        else:
            reads.setdefault(op.addr, None)
    read_only = tuple(a for a in reads if a not in writes)
    return Annotation(read_only, tuple(writes))


def analyze_dependency(tx: Transaction, registry: WorldState) -> AnalysisResult:
    """Annotate the transaction's wallet dependencies or discard it.

    Idempotent: analyzing an already-annotated transaction recomputes the
    same annotation from the same operands.
    """
    if tx.status not in (TxStatus.ENDORSED, TxStatus.ANALYZED):
        raise NotEndorsedError(f"tx {tx.id} is {tx.status.value}, not endorsed")

    for addr in tx.wallet_addresses():
        if not is_valid_wallet(addr, registry):
            return AnalysisResult(
                discard_reason=FailReason.INVALID_WALLET, invalid_addr=addr
            )

    annotation = classify_operands(tx)
    tx.read_wallets = list(annotation.read_wallets)
    tx.write_wallets = list(annotation.write_wallets)
    return AnalysisResult(annotation=annotation)
