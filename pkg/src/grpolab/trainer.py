"""PPO-style clipped-surrogate training on group-sampled rollouts.

One :func:`train_step`:

1. freezes the current parameters as the sampling policy,
2. samples ``group_size`` rollouts for each prompt of the batch and scores
   them with the verifier,
3. assigns one advantage per rollout from its group and broadcasts it to
   every token,
4. runs ``epochs_per_batch`` passes of minibatch Adam updates on the clipped
   surrogate,
5. returns the step's :class:`~grpolab.diagnostics.MetricsRecord`.

Randomness comes from ``numpy.random.SeedSequence`` streams keyed by
``(seed, step, purpose, index)`` so results do not depend on evaluation
order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import diagnostics as diag
from .advantage import AdvantageSpec, assign_group_advantages
from .env import TaskConfig, TaskSet, build_task_set, greedy_solve_rate, verify_rollout
from .policy import (
    ClipConfig,
    PolicyConfig,
    PolicyParams,
    Rollout,
    TokenBatch,
    grad_surrogate,
    mean_token_entropy,
    policy_init,
    rollouts_from_arrays,
    sample_tokens,
    sequence_log_probs,
    surrogate_objective,
    token_log_probs,
)

log = logging.getLogger(__name__)

# stream purposes
_PROMPTS, _ROLLOUTS, _SHUFFLE = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    advantage_spec: AdvantageSpec = field(default_factory=AdvantageSpec)
    group_size: int = 8
    prompts_per_batch: int = 16
    minibatch_size: int = 16  # in prompts (whole groups)
    epochs_per_batch: int = 1
    learning_rate: float = 1e-3
    eps_low: float = 0.2
    eps_high: float = 0.2
    entropy_coef: float = 0.0
    weight_decay: float = 0.0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    aggregation: str = "token"
    hidden: int = 16
    total_steps: int = 300
    val_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps_low <= self.eps_high < 1:
            raise ValueError("need 0 < eps_low <= eps_high < 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.advantage_spec.group_size != self.group_size:
            raise ValueError("advantage_spec.group_size must equal group_size")
        if self.prompts_per_batch < 1 or self.minibatch_size < 1 or self.epochs_per_batch < 1:
            raise ValueError("batch sizes and epoch count must be >= 1")
        if self.aggregation not in ("token", "rollout"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    @property
    def clip(self) -> ClipConfig:
        return ClipConfig(self.eps_low, self.eps_high)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["advantage_spec"] = self.advantage_spec.to_dict()
        out["adam_betas"] = list(self.adam_betas)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        G = data.get("group_size", cls.group_size)
        spec = dict(data.get("advantage_spec", {}))
        spec.setdefault("group_size", G)
        data["advantage_spec"] = AdvantageSpec.from_dict(spec)
        if "adam_betas" in data:
            data["adam_betas"] = tuple(data["adam_betas"])
        return cls(**data)


@dataclass
class AdamState:
    m: PolicyParams
    v: PolicyParams
    t: int = 0


@dataclass
class TrainState:
    step: int
    params: PolicyParams
    adam: AdamState
    seed: int
    ema_reward: float | None = None
    ema_val: float | None = None


def init_state(task_set: TaskSet, config: TrainConfig) -> TrainState:
    pcfg = PolicyConfig(
        n_prompts=len(task_set),
        vocab_size=task_set.vocab_size,
        max_len=task_set.max_len,
        hidden=config.hidden,
    )
    params = policy_init(pcfg, config.seed)
    return TrainState(0, params, AdamState(params.zeros_like(), params.zeros_like()), config.seed)


def rng_stream(seed: int, step: int, purpose: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, step, purpose, index]))


# --------------------------------------------------------------------------- #
# surrogate pieces
# --------------------------------------------------------------------------- #


def importance_ratios(new_params: PolicyParams, rollout: Rollout) -> np.ndarray:
    new = sequence_log_probs(new_params, rollout)
    with np.errstate(over="ignore"):
        ratios = np.exp(new - np.asarray(rollout.logprobs_old))
    if not np.all(np.isfinite(ratios)):
        raise NumericalFailure("non-finite importance ratio")
    return ratios


def clipped_term(ratio: float, advantage: float, eps_low: float, eps_high: float) -> float:
    return min(ratio * advantage, float(np.clip(ratio, 1 - eps_low, 1 + eps_high)) * advantage)


def surrogate_loss(
    new_params: PolicyParams, batch: TokenBatch, advantages: Sequence[float], config: TrainConfig
) -> float:
    loss = surrogate_objective(
        new_params, batch, advantages, config.clip, config.entropy_coef, config.aggregation
    )
    if not np.isfinite(loss):
        raise NumericalFailure("non-finite surrogate loss")
    return loss


def optimizer_step(
    state: TrainState, gradient: PolicyParams, config: TrainConfig
) -> tuple[TrainState, bool]:
    """Adam with bias correction and decoupled weight decay.

    Returns ``(state, applied)``.  A non-finite gradient leaves the state
    untouched and returns ``applied=False``.
    """
    if not gradient.all_finite():
        log.warning("step %d: non-finite gradient, update skipped", state.step)
        return state, False
    b1, b2 = config.adam_betas
    t = state.adam.t + 1
    lr, eps, wd = config.learning_rate, config.adam_eps, config.weight_decay
    m, v, params = state.adam.m.copy(), state.adam.v.copy(), state.params.copy()
    for name, g in gradient.items():
        mi = getattr(m, name)
        vi = getattr(v, name)
        mi *= b1
        mi += (1 - b1) * g
        vi *= b2
        vi += (1 - b2) * g * g
        m_hat = mi / (1 - b1**t)
        v_hat = vi / (1 - b2**t)
        p = getattr(params, name)
        if wd:
            p -= lr * wd * p
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    if not params.all_finite():
        raise NumericalFailure("parameters became non-finite")
    return replace(state, params=params, adam=AdamState(m, v, t)), True


# --------------------------------------------------------------------------- #
# the step
# --------------------------------------------------------------------------- #


@dataclass
class StepBatch:
    """Everything sampled and scored at the start of a step."""

    prompt_ids: np.ndarray
    rollouts: list[Rollout]
    batch: TokenBatch
    accuracies: np.ndarray
    advantages: np.ndarray


def collect_batch(
    state: TrainState,
    task_set: TaskSet,
    config: TrainConfig,
    advantage_fn: Callable = assign_group_advantages,
) -> StepBatch:
    G = config.group_size
    n_prompts = min(config.prompts_per_batch, len(task_set))
    prompt_rng = rng_stream(state.seed, state.step, _PROMPTS)
    prompt_ids = np.sort(prompt_rng.choice(len(task_set), size=n_prompts, replace=False))

    # one independent stream per batch slot
    uniforms = np.concatenate(
        [
            rng_stream(state.seed, state.step, _ROLLOUTS, slot).random((G, task_set.max_len))
            for slot in range(n_prompts)
        ]
    )
    flat_ids = np.repeat(prompt_ids, G)
    rollouts = rollouts_from_arrays(flat_ids, *sample_tokens(state.params, flat_ids, uniforms))
    for r in rollouts:
        r.reward = verify_rollout(task_set, r.prompt_id, r.tokens)

    accuracies = np.empty(n_prompts)
    advantages = np.empty(n_prompts * G)
    for g in range(n_prompts):
        rewards = [r.reward for r in rollouts[g * G : (g + 1) * G]]
        result = advantage_fn(rewards, config.advantage_spec)
        accuracies[g] = result.accuracy
        advantages[g * G : (g + 1) * G] = result.values
    batch = TokenBatch.from_rollouts(rollouts, state.params.vocab_size)
    return StepBatch(prompt_ids, rollouts, batch, accuracies, advantages)


def _rollout_sums(values: np.ndarray, batch: TokenBatch) -> np.ndarray:
    return np.bincount(batch.rollout_index, weights=values, minlength=batch.n_rollouts)


def train_step(
    state: TrainState,
    task_set: TaskSet,
    config: TrainConfig,
    advantage_fn: Callable = assign_group_advantages,
) -> tuple[TrainState, diag.MetricsRecord]:
    G = config.group_size
    old_params = state.params.copy()
    sb = collect_batch(state, task_set, config, advantage_fn)
    batch, advantages = sb.batch, sb.advantages
    n_groups = len(sb.prompt_ids)

    entropy = mean_token_entropy(old_params, batch)
    old_tok_logp = batch.logp_old
    # length-normalized log-probability of each rollout under the sampling policy
    norm_logp = _rollout_sums(old_tok_logp, batch) / batch.lengths

    bins: dict[int, list[float]] = {}
    for g in range(n_groups):
        k = int(round(sb.accuracies[g] * G))
        if 0 < k < G:
            sl = slice(g * G, (g + 1) * G)
            bins.setdefault(k, []).append(diag.group_covariance(norm_logp[sl], advantages[sl]))

    max_dev = 0.0
    skipped = 0
    shuffle_rng = rng_stream(state.seed, state.step, _SHUFFLE)
    mb = min(config.minibatch_size, n_groups)
    for epoch in range(config.epochs_per_batch):
        order = shuffle_rng.permutation(n_groups)
        for start in range(0, n_groups, mb):
            groups = np.sort(order[start : start + mb])
            rows = (groups[:, None] * G + np.arange(G)).ravel()
            sub = batch.select(rows)
            if epoch == 0 and start == 0:
                ratios = np.exp(token_log_probs(state.params, sub) - sub.logp_old)
                max_dev = float(np.max(np.abs(ratios - 1.0)))
            grad = grad_surrogate(
                state.params,
                sub,
                advantages[rows],
                config.clip,
                config.entropy_coef,
                config.aggregation,
            )
            state, applied = optimizer_step(state, grad, config)
            skipped += not applied

    pos = batch.rewards == 1
    if pos.any():
        new_sums = _rollout_sums(token_log_probs(state.params, batch), batch)[pos]
        old_sums = _rollout_sums(old_tok_logp, batch)[pos]
        increment = diag.positive_logprob_increment(old_sums, new_sums)
    else:
        increment = None

    solved_all, solved_none = diag.solved_proportions(sb.accuracies)
    reward = float(batch.rewards.mean())
    val = None
    if config.val_every and state.step % config.val_every == 0:
        val = greedy_solve_rate(task_set, old_params)

    ema_reward = diag.ema_update(state.ema_reward, reward)
    ema_val = diag.ema_update(state.ema_val, val) if val is not None else state.ema_val
    record = diag.MetricsRecord(
        step=state.step,
        mean_train_reward=reward,
        mean_token_entropy=entropy,
        solved_all_fraction=solved_all,
        solved_none_fraction=solved_none,
        pos_logprob_increment=increment,
        covariance_bins={k: (float(np.mean(v)), len(v)) for k, v in sorted(bins.items())},
        validation_accuracy=val,
        ema_train_reward=ema_reward,
        ema_validation_accuracy=ema_val,
        max_ratio_deviation=max_dev,
        mean_rollout_length=float(batch.lengths.mean()),
        skipped_updates=skipped,
    )
    state = replace(state, step=state.step + 1, ema_reward=ema_reward, ema_val=ema_val)
    return state, record


def train(
    task_set: TaskSet,
    config: TrainConfig,
    callback: Callable[[TrainState, diag.MetricsRecord], None] | None = None,
) -> tuple[TrainState, list[diag.MetricsRecord]]:
    state = init_state(task_set, config)
    records = []
    for _ in range(config.total_steps):
        state, rec = train_step(state, task_set, config)
        records.append(rec)
        if callback is not None:
            callback(state, rec)
    return state, records


def run_experiment(
    task_config: TaskConfig, config: TrainConfig, task_seed: int = 0
) -> tuple[TaskSet, TrainState, list[diag.MetricsRecord]]:
    """Build the task set and train on it."""
    task_set = build_task_set(task_config, task_seed)
    state, records = train(task_set, config)
    return task_set, state, records
