"""Deterministic simulator and benchmark harness for an execute-order
transaction pipeline with pluggable ordering strategies."""

from .config import ConfigError, FlapSchedule, ScenarioConfig, load_config, parse_config
from .engine import (
    SimResult,
    Simulation,
    StallDetected,
    TraceRecord,
    prepare_plan,
    run_simulation,
)
from .ledger import (
    AccessType,
    Block,
    FailReason,
    Operand,
    ReadWriteSet,
    Transaction,
    TxStatus,
    TxType,
    Wallet,
    WorldState,
)
from .metrics import (
    MetricsReport,
    MetricsRow,
    MismatchedWorkload,
    build_report,
    compare_reports,
    fingerprint_digest,
    success_share_buckets,
)
from .oracle import ReplayReport, replay_blocks, verify_run
from .strategies import Strategy
from .workload import (
    ClosedLoop,
    OpenLoop,
    WorkloadConfig,
    WorkloadPlan,
    generate_workload,
    inject_invalid_addresses,
)

__version__ = "0.1.0"

__all__ = [
    "AccessType",
    "Block",
    "ClosedLoop",
    "ConfigError",
    "FailReason",
    "FlapSchedule",
    "MetricsReport",
    "MetricsRow",
    "MismatchedWorkload",
    "OpenLoop",
    "Operand",
    "ReadWriteSet",
    "ReplayReport",
    "ScenarioConfig",
    "SimResult",
    "Simulation",
    "StallDetected",
    "Strategy",
    "TraceRecord",
    "Transaction",
    "TxStatus",
    "TxType",
    "Wallet",
    "WorkloadConfig",
    "WorkloadPlan",
    "WorldState",
    "build_report",
    "compare_reports",
    "fingerprint_digest",
    "generate_workload",
    "inject_invalid_addresses",
    "load_config",
    "parse_config",
    "prepare_plan",
    "replay_blocks",
    "run_simulation",
    "success_share_buckets",
    "verify_run",
]
