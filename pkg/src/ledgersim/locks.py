"""Reader/writer lock table over wallet addresses.

Lock acquisition is all-or-nothing and the table is mutated only from the
single-threaded simulation loop, so there is no hold-and-wait and therefore
no deadlock by construction.  Shared read locks are the default; a write
lock excludes everything.  Invariants are asserted on every mutation.
"""

from __future__ import annotations

from .ledger import AccessType


class InvariantViolation(AssertionError):
    """A structural invariant of the simulation was broken."""


class DoubleReleaseError(InvariantViolation):
    pass


class LockTable:
    READ = "R"
    WRITE = "W"

    def __init__(self) -> None:
        # addr -> (mode, holders); READ holders are a set, WRITE a single id.
        self._locks: dict[str, tuple[str, set[int] | int]] = {}
        self._held: dict[int, tuple[tuple[str, ...], tuple[str, ...]]] = {}

    def is_locked(self, addr: str, access: AccessType) -> bool:
        entry = self._locks.get(addr)
        if entry is None:
            return False
        mode, _ = entry
        if access is AccessType.READ:
            return mode == self.WRITE
        return True  # a write is blocked by any existing lock

    def can_acquire(self, read_addrs, write_addrs) -> bool:
        return not (
            any(self.is_locked(a, AccessType.READ) for a in read_addrs)
            or any(self.is_locked(a, AccessType.WRITE) for a in write_addrs)
        )

    def acquire(self, tx_id: int, read_addrs, write_addrs) -> None:
        """Take every lock at once; the caller must have checked first."""
        if tx_id in self._held:
            raise InvariantViolation(f"tx {tx_id} already holds locks")
        if not self.can_acquire(read_addrs, write_addrs):
            raise InvariantViolation(f"tx {tx_id} acquiring contested locks")
        for addr in write_addrs:
            if addr in self._locks:
                raise InvariantViolation(f"write lock on locked wallet {addr}")
            self._locks[addr] = (self.WRITE, tx_id)
        for addr in read_addrs:
            entry = self._locks.get(addr)
            if entry is None:
                self._locks[addr] = (self.READ, {tx_id})
            else:
                mode, holders = entry
                if mode != self.READ:
                    raise InvariantViolation(f"read lock under write lock {addr}")
                holders.add(tx_id)
        self._held[tx_id] = (tuple(read_addrs), tuple(write_addrs))
        self._check(read_addrs, write_addrs)

    def release(self, tx_id: int) -> None:
        held = self._held.pop(tx_id, None)
        if held is None:
            raise DoubleReleaseError(f"tx {tx_id} holds no locks")
        read_addrs, write_addrs = held
        for addr in write_addrs:
            mode, holder = self._locks[addr]
            if mode != self.WRITE or holder != tx_id:
                raise InvariantViolation(f"corrupt write lock on {addr}")
            del self._locks[addr]
        for addr in read_addrs:
            mode, holders = self._locks[addr]
            if mode != self.READ or tx_id not in holders:
                raise InvariantViolation(f"corrupt read lock on {addr}")
            holders.discard(tx_id)
            if not holders:
                del self._locks[addr]

    def holders(self, addr: str) -> tuple[str, frozenset[int]] | None:
        entry = self._locks.get(addr)
        if entry is None:
            return None
        mode, holders = entry
        return (mode, frozenset(holders) if mode == self.READ else frozenset({holders}))

    def held_by(self, tx_id: int) -> bool:
        return tx_id in self._held

    def holding_count(self) -> int:
        return len(self._held)

    def snapshot(self) -> dict:
        """JSON-friendly dump of the current lock state, for diagnostics."""
        out = {}
        for addr in sorted(self._locks):
            mode, holders = self._locks[addr]
            out[addr] = {
                "mode": mode,
                "holders": sorted(holders) if mode == self.READ else [holders],
            }
        return out

    def _check(self, read_addrs, write_addrs) -> None:
        for addr in write_addrs:
            mode, holder = self._locks[addr]
            if mode != self.WRITE or not isinstance(holder, int):
                raise InvariantViolation(f"write lock shape broken at {addr}")
        for addr in read_addrs:
            mode, holders = self._locks[addr]
            if mode != self.READ or not holders:
                raise InvariantViolation(f"read lock shape broken at {addr}")
