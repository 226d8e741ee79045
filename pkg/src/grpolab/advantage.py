"""Rollout-level advantage estimators for binary group rewards.

Every estimator here maps the G binary rewards of one prompt's group to one
scalar advantage per rollout.  The values are later broadcast to every token
of the rollout by the trainer.

Three modes are supported:

* ``constant``      ``2r - 1``; independent of the group (REINFORCE).
* ``standardized``  ``(r - mean) / std`` computed directly on the reward vector.
* ``parametric``    the accuracy-driven family ``((1-p)/p)**beta_pos`` for
  correct rollouts and ``-(p/(1-p))**beta_neg`` for incorrect ones, with
  optional reflection of either side around ``p = 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "AdvantageSpec",
    "GroupAdvantages",
    "InvalidGroupError",
    "Mode",
    "UnreachableBranchError",
    "advantage_constant",
    "advantage_flipped",
    "advantage_parametric",
    "advantage_standardized",
    "assign_group_advantages",
    "group_accuracy",
]

_GRID_TOL = 1e-9


class InvalidGroupError(ValueError):
    """Raised for reward groups that are empty, too small or non-binary."""


class UnreachableBranchError(ValueError):
    """Raised when asked for the advantage of a rollout that cannot exist.

    A correct rollout cannot live in a group of accuracy 0, nor an incorrect
    one in a group of accuracy 1.
    """


class Mode(str, Enum):
    CONSTANT = "constant"
    STANDARDIZED = "standardized"
    PARAMETRIC = "parametric"


@dataclass(frozen=True)
class AdvantageSpec:
    mode: Mode = Mode.PARAMETRIC
    beta_pos: float = 0.5
    beta_neg: float = 0.5
    flip_pos: bool = False
    flip_neg: bool = False
    group_size: int = 8

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.beta_pos < 0 or self.beta_neg < 0:
            raise ValueError("beta_pos and beta_neg must be non-negative")
        if (self.flip_pos or self.flip_neg) and self.mode is not Mode.PARAMETRIC:
            raise ValueError("flip flags are only meaningful in parametric mode")
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")

    @classmethod
    def constant(cls, group_size: int = 8) -> "AdvantageSpec":
        return cls(Mode.CONSTANT, 0.0, 0.0, group_size=group_size)

    @classmethod
    def standardized(cls, group_size: int = 8) -> "AdvantageSpec":
        return cls(Mode.STANDARDIZED, 0.5, 0.5, group_size=group_size)

    @classmethod
    def parametric(
        cls,
        beta_pos: float,
        beta_neg: float,
        *,
        flip_pos: bool = False,
        flip_neg: bool = False,
        group_size: int = 8,
    ) -> "AdvantageSpec":
        return cls(Mode.PARAMETRIC, beta_pos, beta_neg, flip_pos, flip_neg, group_size)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "beta_pos": self.beta_pos,
            "beta_neg": self.beta_neg,
            "flip_pos": self.flip_pos,
            "flip_neg": self.flip_neg,
            "group_size": self.group_size,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AdvantageSpec":
        return cls(**data)


@dataclass(frozen=True)
class GroupAdvantages:
    values: np.ndarray
    accuracy: float
    degenerate: bool


def _check_rewards(rewards: Sequence[int]) -> np.ndarray:
    arr = np.asarray(rewards)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidGroupError(f"a group needs at least 2 rewards, got {arr.size}")
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidGroupError("rewards must be binary (0 or 1)")
    return arr.astype(float)


def group_accuracy(rewards: Sequence[int]) -> float:
    """Fraction of correct rollouts in the group."""
    arr = _check_rewards(rewards)
    return int(arr.sum()) / arr.size


def advantage_constant(reward: int) -> float:
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    return 2.0 * reward - 1.0


def advantage_standardized(rewards: Sequence[int]) -> GroupAdvantages:
    """Standardize rewards against their own group mean and population std.

    Zero-variance groups (all correct or all wrong) get all-zero advantages
    and ``degenerate=True``.
    """
    arr = _check_rewards(rewards)
    mean = arr.mean()
    std = arr.std()  # ddof=0
    if std == 0.0:
        return GroupAdvantages(np.zeros_like(arr), float(mean), True)
    return GroupAdvantages((arr - mean) / std, float(mean), False)


def advantage_parametric(p: float, reward: int, beta_pos: float, beta_neg: float) -> float:
    """Accuracy-parametrized advantage of one rollout.

    At the evaluable endpoints (a correct rollout with ``p == 1`` or an
    incorrect one with ``p == 0``) the analytic limit is returned: 0 when the
    exponent is positive, and the REINFORCE value ``±1`` when it is zero.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {p}")
    if reward == 1:
        if p == 0.0:
            raise UnreachableBranchError("no correct rollout exists in a group with p=0")
        if p == 1.0:
            return 0.0 if beta_pos > 0 else 1.0
        return ((1.0 - p) / p) ** beta_pos
    if reward == 0:
        if p == 1.0:
            raise UnreachableBranchError("no incorrect rollout exists in a group with p=1")
        if p == 0.0:
            return 0.0 if beta_neg > 0 else -1.0
        return -((p / (1.0 - p)) ** beta_neg)
    raise ValueError(f"reward must be 0 or 1, got {reward!r}")


def _on_grid(p: float, group_size: int) -> bool:
    k = p * group_size
    return abs(k - round(k)) <= _GRID_TOL


def advantage_flipped(
    p: float, reward: int, beta: float, group_size: int, *, on_grid: bool = True
) -> float:
    """Advantage curve reflected around ``p = 0.5``, with linear end segments.

    The reflected positive curve is singular at ``p = 1`` and the reflected
    negative curve at ``p = 0``.  On the last grid interval next to the
    singularity the curve is replaced by a straight line whose far endpoint
    repeats the increment between the two nearest interior grid points.

    With ``on_grid=True`` (the default) ``p`` must be a multiple of
    ``1/group_size``; pass ``on_grid=False`` to evaluate the continuous curve,
    e.g. for plotting.
    """
    G = group_size
    if G < 3:
        raise InvalidGroupError("flipped curves need group_size >= 3")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {p}")
    if on_grid and not _on_grid(p, G):
        raise ValueError(f"accuracy {p} is not a multiple of 1/{G}")

    if reward == 1:
        if p == 0.0:
            raise UnreachableBranchError("no correct rollout exists in a group with p=0")
        last = (G - 1) / G
        if p <= last:
            return advantage_parametric(1.0 - p, 1, beta, beta)
        v_last = advantage_parametric(1.0 - last, 1, beta, beta)
        v_prev = advantage_parametric(1.0 - (G - 2) / G, 1, beta, beta)
        v_end = v_last + (v_last - v_prev)
        return v_last + (p - last) / (1.0 - last) * (v_end - v_last)

    if reward == 0:
        if p == 1.0:
            raise UnreachableBranchError("no incorrect rollout exists in a group with p=1")
        first = 1.0 / G
        if p >= first:
            return advantage_parametric(1.0 - p, 0, beta, beta)
        v_first = advantage_parametric(1.0 - first, 0, beta, beta)
        v_next = advantage_parametric(1.0 - 2.0 / G, 0, beta, beta)
        v_end = v_first - (v_next - v_first)
        return v_end + p / first * (v_first - v_end)

    raise ValueError(f"reward must be 0 or 1, got {reward!r}")


def assign_group_advantages(rewards: Sequence[int], spec: AdvantageSpec) -> GroupAdvantages:
    arr = _check_rewards(rewards)
    if arr.size != spec.group_size:
        raise InvalidGroupError(
            f"group has {arr.size} rollouts but the spec expects {spec.group_size}"
        )
    if spec.mode is Mode.STANDARDIZED:
        return advantage_standardized(arr)

    p = group_accuracy(arr)
    if spec.mode is Mode.CONSTANT:
        values = 2.0 * arr - 1.0
    else:
        # one value per reward class; every rollout of a class shares it
        per_class = {}
        for r in {int(x) for x in arr}:
            if r == 1 and spec.flip_pos:
                per_class[r] = advantage_flipped(p, 1, spec.beta_pos, spec.group_size)
            elif r == 0 and spec.flip_neg:
                per_class[r] = advantage_flipped(p, 0, spec.beta_neg, spec.group_size)
            else:
                per_class[r] = advantage_parametric(p, r, spec.beta_pos, spec.beta_neg)
        values = np.array([per_class[int(x)] for x in arr])
    degenerate = bool(np.all(values == 0.0))
    return GroupAdvantages(values, p, degenerate)


def curve(p: np.ndarray, beta: float, positive: bool) -> np.ndarray:
    """Vectorized unflipped curve on the open interval (0, 1), for plotting."""
    p = np.asarray(p, dtype=float)
    if positive:
        return ((1.0 - p) / p) ** beta
    return -((p / (1.0 - p)) ** beta)

