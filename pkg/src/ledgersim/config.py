"""Scenario configuration: a single strict-schema JSON document.

Unknown keys are rejected everywhere so a typo cannot silently fall back to a
default.  Strategy-dependent defaults (scan window, idle cutting, whether the
dependency manager runs) are resolved here so the engine sees only concrete
values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .endorsement import EndorsementPolicy
from .ledger import TxType, is_wellformed_address
from .strategies import Strategy
from .workload import ClosedLoop, OpenLoop, WorkloadConfig


class ConfigError(ValueError):
    """Scenario file failed to parse or validate."""


DEFAULT_SERVICE_TIMES = {"endorse": 20, "analyze": 83, "order": 50, "validate": 5}
DEFAULT_SIGMA = 0.25


@dataclass
class FlapSchedule:
    """Availability duty cycle for the outage-prone wallet.

    Within each period the wallet is down for the final ``down`` ticks.
    """

    period: int = 1000
    down: int = 150

    def __post_init__(self) -> None:
        if not (0 < self.down < self.period):
            raise ConfigError("flap.down must be within (0, flap.period)")


@dataclass
class ScenarioConfig:
    seed: int
    strategy: Strategy
    workload: WorkloadConfig
    policy: EndorsementPolicy = field(default_factory=EndorsementPolicy)
    channel_count: int = 1
    queue_limit: int = 32
    block_size: int = 10
    batch_timeout: int = 2000
    service_times: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SERVICE_TIMES))
    sigma: float = DEFAULT_SIGMA
    window: int | None = None  # reorder window; defaults to batch_timeout
    sync_delay: int = 50
    endorse_workers: int = 8
    hot_key_coefficient: float = 0.0
    max_lag: int = 2
    flap: FlapSchedule | None = field(default_factory=FlapSchedule)
    invalid_rate: float = 0.0
    # flags
    exclusive_read_locks: bool = False
    dependency_manager_enabled: bool = False
    scan_window: int = 64
    idle_cut: bool = False
    defer_unavailable: bool = False

    @property
    def reorder_window(self) -> int:
        return self.batch_timeout if self.window is None else self.window


def expand_accounts(n: int) -> list[str]:
    """Deterministic account universe: the four fixed roles, then numbered."""
    if n < 4:
        raise ConfigError("accountCount must be at least 4")
    base = ["W-A", "W-B", "W-C", "W-D"]
    return base + [f"W-N{i:02d}" for i in range(5, n + 1)]


def _require(obj: dict, context: str, allowed: dict[str, bool]) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {sorted(unknown)}")
    missing = [k for k, req in allowed.items() if req and k not in obj]
    if missing:
        raise ConfigError(f"{context}: missing required key(s) {missing}")


def _int_in(obj: dict, key: str, context: str, lo: int, hi: int | None = None, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{context}.{key}: expected an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(f"{context}.{key}: {v} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def _num(obj: dict, key: str, context: str, lo: float, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{context}.{key}: expected a number, got {v!r}")
    if v < lo:
        raise ConfigError(f"{context}.{key}: {v} below minimum {lo}")
    return float(v)


def _parse_workload(obj: dict, seed: int) -> WorkloadConfig:
    _require(obj, "workload", {
        "counts": True, "accounts": False, "accountCount": False,
        "initialBalance": False, "arrival": False, "amountRange": False,
        "readPool": False, "updatePool": False, "floatPool": False,
        "sinkPool": False, "type6UnavailableProb": False, "seed": False,
    })

    counts: dict[TxType, int] = {}
    for name, n in obj["counts"].items():
        try:
            tx_type = TxType(name)
        except ValueError:
            valid = ", ".join(t.value for t in TxType)
            raise ConfigError(f"workload.counts: unknown type {name!r} (expected: {valid})")
        counts[tx_type] = _int_in({"n": n}, "n", f"workload.counts[{name}]", 0)

    if "accounts" in obj and "accountCount" in obj:
        raise ConfigError("workload: give either accounts or accountCount, not both")
    if "accounts" in obj:
        accounts = list(obj["accounts"])
        for a in accounts:
            if not isinstance(a, str) or not is_wellformed_address(a):
                raise ConfigError(f"workload.accounts: malformed address {a!r}")
    elif "accountCount" in obj:
        accounts = expand_accounts(_int_in(obj, "accountCount", "workload", 4))
    else:
        accounts = expand_accounts(4)

    arrival_obj = obj.get("arrival", {"model": "open", "rate": 100.0})
    _require(arrival_obj, "workload.arrival",
             {"model": True, "rate": False, "clients": False})
    model = arrival_obj.get("model")
    if model == "open":
        rate = _num(arrival_obj, "rate", "workload.arrival", 0.001)
        if rate is None:
            raise ConfigError("workload.arrival: open model needs a rate")
        arrival = OpenLoop(rate)
    elif model == "closed":
        clients = _int_in(arrival_obj, "clients", "workload.arrival", 1)
        if clients is None:
            raise ConfigError("workload.arrival: closed model needs clients")
        arrival = ClosedLoop(clients)
    else:
        raise ConfigError(f"workload.arrival.model: {model!r} is not open|closed")

    amount_range = None
    if "amountRange" in obj:
        pair = obj["amountRange"]
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)):
            raise ConfigError("workload.amountRange: expected [min, max] integers")
        amount_range = (pair[0], pair[1])

    try:
        return WorkloadConfig(
            seed=obj.get("seed", seed),
            counts=counts,
            accounts=accounts,
            initial_balance=_int_in(obj, "initialBalance", "workload", 1, default=10_000),
            arrival=arrival,
            amount_range=amount_range,
            read_pool=_int_in(obj, "readPool", "workload", 1, default=64),
            update_pool=_int_in(obj, "updatePool", "workload", 2, default=32),
            float_pool=_int_in(obj, "floatPool", "workload", 1, default=16),
            sink_pool=_int_in(obj, "sinkPool", "workload", 1, default=8),
            type6_unavailable_prob=_num(obj, "type6UnavailableProb", "workload", 0.0, default=1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"workload: {exc}") from exc


def parse_config(doc: dict) -> ScenarioConfig:
    _require(doc, "scenario", {
        "seed": True, "strategy": True, "workload": True,
        "policy": False, "channels": False, "blockSize": False,
        "batchTimeout": False, "serviceTimes": False, "window": False,
        "syncDelay": False, "endorseWorkers": False, "hotKeyCoefficient": False,
        "maxLag": False, "flap": False, "invalidRate": False, "flags": False,
    })

    seed = _int_in(doc, "seed", "scenario", 0)
    try:
        strategy = Strategy.parse(doc["strategy"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    workload = _parse_workload(doc["workload"], seed)

    policy_obj = doc.get("policy", {})
    _require(policy_obj, "policy", {"endorsers": False, "required": False})
    try:
        policy = EndorsementPolicy(
            endorsers=_int_in(policy_obj, "endorsers", "policy", 1, default=3),
            required=_int_in(policy_obj, "required", "policy", 1, default=2),
        )
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from exc

    channels_obj = doc.get("channels", {})
    _require(channels_obj, "channels", {"count": False, "queueLimit": False})
    channel_count = _int_in(channels_obj, "count", "channels", 0, default=(
        4 if strategy is Strategy.DEP_PARALLEL else 1))
    queue_limit = _int_in(channels_obj, "queueLimit", "channels", 1, default=32)
    if strategy is Strategy.DEP_PARALLEL:
        if channel_count < 1:
            raise ConfigError("channels.count: parallel ordering needs at least one channel")
    elif channel_count != 1:
        raise ConfigError(f"channels.count: strategy {strategy.value} runs single-channel")

    service_times = dict(DEFAULT_SERVICE_TIMES)
    sigma = DEFAULT_SIGMA
    if "serviceTimes" in doc:
        st = doc["serviceTimes"]
        _require(st, "serviceTimes", {
            "endorse": False, "analyze": False, "order": False,
            "validate": False, "sigma": False,
        })
        for stage in ("endorse", "analyze", "order", "validate"):
            got = _int_in(st, stage, "serviceTimes", 1)
            if got is not None:
                service_times[stage] = got
        got_sigma = _num(st, "sigma", "serviceTimes", 0.0)
        if got_sigma is not None:
            sigma = got_sigma

    flap = FlapSchedule()
    if "flap" in doc:
        if doc["flap"] is None:
            flap = None
        else:
            flap_obj = doc["flap"]
            _require(flap_obj, "flap", {"period": False, "down": False})
            flap = FlapSchedule(
                period=_int_in(flap_obj, "period", "flap", 2, default=1000),
                down=_int_in(flap_obj, "down", "flap", 1, default=150),
            )

    flags = doc.get("flags", {})
    _require(flags, "flags", {
        "exclusiveReadLocks": False, "dependencyManagerEnabled": False,
        "scanWindow": False, "idleCut": False, "deferUnavailable": False,
    })
    for key in ("exclusiveReadLocks", "dependencyManagerEnabled", "idleCut", "deferUnavailable"):
        if key in flags and not isinstance(flags[key], bool):
            raise ConfigError(f"flags.{key}: expected true/false")

    is_parallel = strategy is Strategy.DEP_PARALLEL
    return ScenarioConfig(
        seed=seed,
        strategy=strategy,
        workload=workload,
        policy=policy,
        channel_count=channel_count,
        queue_limit=queue_limit,
        block_size=_int_in(doc, "blockSize", "scenario", 1, default=10),
        batch_timeout=_int_in(doc, "batchTimeout", "scenario", 1, default=2000),
        service_times=service_times,
        sigma=sigma,
        window=_int_in(doc, "window", "scenario", 1, default=None),
        sync_delay=_int_in(doc, "syncDelay", "scenario", 0, default=50),
        endorse_workers=_int_in(doc, "endorseWorkers", "scenario", 1, default=8),
        hot_key_coefficient=_num(doc, "hotKeyCoefficient", "scenario", 0.0, default=0.0),
        max_lag=_int_in(doc, "maxLag", "scenario", 0, default=2),
        flap=flap,
        invalid_rate=_num(doc, "invalidRate", "scenario", 0.0, default=0.0),
        exclusive_read_locks=flags.get("exclusiveReadLocks", False),
        dependency_manager_enabled=flags.get("dependencyManagerEnabled", is_parallel),
        scan_window=_int_in(flags, "scanWindow", "flags", 1,
                            default=(64 if is_parallel else 1)),
        idle_cut=flags.get("idleCut", is_parallel),
        defer_unavailable=flags.get("deferUnavailable", is_parallel),
    )


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(doc)
