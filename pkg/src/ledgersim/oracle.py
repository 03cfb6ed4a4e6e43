"""Independent replay verification of a persisted run.

Rebuilds world state from the genesis document by re-validating every block's
read/write sets in commit order, trusting nothing but the block stream
itself.  The replayed state must match the reported final state field for
field; the first divergence is reported with its location.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ledger import (
    ReadWriteSet,
    ValidationKind,
    WorldState,
    apply_write_set,
    validate_read_set,
)


class OutOfOrderBlock(ValueError):
    """Block heights must ascend without gaps from the genesis height."""


@dataclass(frozen=True)
class Divergence:
    where: str
    expected: object
    actual: object

    def __str__(self) -> str:
        return f"{self.where}: expected {self.expected!r}, got {self.actual!r}"


@dataclass
class ReplayReport:
    ok: bool
    blocks_replayed: int = 0
    committed: int = 0
    rejected: int = 0
    divergence: Divergence | None = None


def replay_blocks(genesis_obj: dict, block_objs: list[dict]) -> tuple[WorldState, int, int]:
    """Re-validate and apply each block; returns (state, committed, rejected)."""
    state = WorldState.from_json_obj(genesis_obj)
    committed = rejected = 0
    for block in block_objs:
        height = int(block["height"])
        if height != state.height + 1:
            raise OutOfOrderBlock(
                f"block height {height} after height {state.height}")
        for entry in block["txs"]:
            rwset = ReadWriteSet.from_json_obj(entry)
            if validate_read_set(state, rwset).kind is ValidationKind.VALID:
                apply_write_set(state, rwset)
                committed += 1
            else:
                rejected += 1
        state.height = height
    return state, committed, rejected


# Replicated ledger fields only.  Availability is an operational signal that
# blocks never carry (a wallet can flap between commits without any version
# bump), so replay cannot and should not reconstruct it.
_REPLICATED_FIELDS = ("balance", "version")


def _first_divergence(expected: WorldState, actual: WorldState) -> Divergence | None:
    if expected.height != actual.height:
        return Divergence("height", expected.height, actual.height)
    for addr in sorted(set(expected.wallets) | set(actual.wallets)):
        exp = expected.wallets.get(addr)
        act = actual.wallets.get(addr)
        if exp is None or act is None:
            return Divergence(
                f"wallets[{addr}]",
                exp.to_json_obj() if exp else None,
                act.to_json_obj() if act else None,
            )
        for field_name in _REPLICATED_FIELDS:
            if getattr(exp, field_name) != getattr(act, field_name):
                return Divergence(
                    f"wallets[{addr}].{field_name}",
                    getattr(exp, field_name),
                    getattr(act, field_name),
                )
    return None


def verify_run(genesis_obj: dict, block_objs: list[dict], final_obj: dict) -> ReplayReport:
    """Replay the block stream and compare against the reported final state."""
    try:
        replayed, committed, rejected = replay_blocks(genesis_obj, block_objs)
    except OutOfOrderBlock as exc:
        return ReplayReport(
            ok=False, divergence=Divergence("blockOrder", "gap-free heights", str(exc)))
    reported = WorldState.from_json_obj(final_obj)
    divergence = _first_divergence(reported, replayed)
    return ReplayReport(
        ok=divergence is None,
        blocks_replayed=len(block_objs),
        committed=committed,
        rejected=rejected,
        divergence=divergence,
    )
