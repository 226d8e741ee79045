"""Group-relative policy optimization at desk scale.

Advantage estimators (REINFORCE, GRPO, the beta-parametric family and its
asymmetric and flipped variants), a tiny autoregressive softmax policy with
hand-written gradients, a clipped-surrogate trainer, synthetic verifiable
tasks and the entropy / covariance diagnostics used to compare them.
"""

from .advantage import (
    AdvantageSpec,
    GroupAdvantages,
    InvalidGroupError,
    Mode,
    UnreachableBranchError,
    advantage_constant,
    advantage_flipped,
    advantage_parametric,
    advantage_standardized,
    assign_group_advantages,
    group_accuracy,
)
from .diagnostics import MetricsRecord, read_metrics, write_metrics
from .env import TaskConfig, TaskGenerationError, TaskSet, Tier, build_task_set, verify_rollout
from .policy import ClipConfig, PolicyConfig, PolicyParams, Rollout, policy_init
from .presets import PRESETS, apply_preset, preset_spec
from .trainer import NumericalFailure, TrainConfig, train, train_step

__version__ = "0.1.0"

__all__ = [
    "AdvantageSpec",
    "ClipConfig",
    "GroupAdvantages",
    "InvalidGroupError",
    "MetricsRecord",
    "Mode",
    "NumericalFailure",
    "PRESETS",
    "PolicyConfig",
    "PolicyParams",
    "Rollout",
    "TaskConfig",
    "TaskGenerationError",
    "TaskSet",
    "Tier",
    "TrainConfig",
    "UnreachableBranchError",
    "advantage_constant",
    "advantage_flipped",
    "advantage_parametric",
    "advantage_standardized",
    "apply_preset",
    "assign_group_advantages",
    "build_task_set",
    "group_accuracy",
    "policy_init",
    "preset_spec",
    "read_metrics",
    "train",
    "train_step",
    "verify_rollout",
    "write_metrics",
]
