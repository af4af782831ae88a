"""GRPO machinery and the toy policy that exercises it."""

from .arpo import ArpoConfig, arpo_rollout_group, branch_points
from .grpo import (
    BatchStructureError,
    ClipConfig,
    DecisionModel,
    FdReport,
    GroupBatch,
    MemberRecord,
    SurrogateResult,
    dapo_filter,
    finite_difference_check,
    group_advantages,
    surrogate_objective,
)
from .toy import GreedyPolicy, MiniTask, PrefixPolicy, ToyPolicy, make_minitask
from .train import (
    DivergenceError,
    TrainConfig,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
    train_toy,
    validation_success,
    write_curve,
)

__all__ = [
    "ArpoConfig",
    "BatchStructureError",
    "ClipConfig",
    "DecisionModel",
    "DivergenceError",
    "FdReport",
    "GreedyPolicy",
    "GroupBatch",
    "MemberRecord",
    "MiniTask",
    "PrefixPolicy",
    "SurrogateResult",
    "ToyPolicy",
    "TrainConfig",
    "TrainResult",
    "arpo_rollout_group",
    "branch_points",
    "dapo_filter",
    "finite_difference_check",
    "group_advantages",
    "load_checkpoint",
    "make_minitask",
    "save_checkpoint",
    "surrogate_objective",
    "train_toy",
    "validation_success",
    "write_curve",
]
