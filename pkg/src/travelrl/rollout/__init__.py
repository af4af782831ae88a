from .policy import (
    Decision,
    Emission,
    OraclePolicy,
    Policy,
    PolicyTransportError,
    RandomPolicy,
    SilentPolicy,
    is_failure_observation,
)
from .prompt import SYSTEM_PROMPT, initial_messages
from .remote import RemotePolicy
from .runner import (
    MetricsReport,
    RolloutConfigError,
    RolloutGroup,
    RolloutResult,
    metrics_report,
    result_record,
    rollout,
    rollout_group,
    run_benchmark,
    run_rollouts,
)
from .sft import SftStats, export_sft, filter_sft, sft_conversation

__all__ = [
    "RemotePolicy",
    "SftStats",
    "export_sft",
    "filter_sft",
    "sft_conversation",
    "Decision",
    "Emission",
    "MetricsReport",
    "OraclePolicy",
    "Policy",
    "PolicyTransportError",
    "RandomPolicy",
    "RolloutConfigError",
    "RolloutGroup",
    "RolloutResult",
    "SYSTEM_PROMPT",
    "SilentPolicy",
    "initial_messages",
    "is_failure_observation",
    "metrics_report",
    "result_record",
    "rollout",
    "rollout_group",
    "run_benchmark",
    "run_rollouts",
]
