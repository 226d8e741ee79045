"""Synthetic verifiable-reward tasks.

A prompt asks for exactly ``length`` digit tokens whose sum is congruent to
``target`` modulo ``modulus``.  Tokens ``0 .. n_digits-1`` are digits and the
token ``n_digits`` is end-of-sequence (stripped before checking).  Larger
moduli make a prompt harder: a policy that picks digits uniformly succeeds
with probability close to ``1/modulus``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .policy import PolicyParams, sample_tokens


class TaskGenerationError(ValueError):
    pass


@dataclass(frozen=True)
class Tier:
    modulus: int
    length: int
    count: int


@dataclass(frozen=True)
class Prompt:
    id: int
    tier: int
    modulus: int
    length: int
    target: int


@dataclass(frozen=True)
class TaskConfig:
    tiers: tuple[Tier, ...] = (
        Tier(modulus=2, length=3, count=8),
        Tier(modulus=3, length=3, count=8),
        Tier(modulus=5, length=3, count=8),
        Tier(modulus=8, length=3, count=8),
    )
    n_digits: int = 4
    max_len: int = 3

    @property
    def vocab_size(self) -> int:
        return self.n_digits + 1

    def to_dict(self) -> dict:
        return {
            "tiers": [asdict(t) for t in self.tiers],
            "n_digits": self.n_digits,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskConfig":
        data = dict(data)
        if "tiers" in data:
            data["tiers"] = tuple(Tier(**t) for t in data["tiers"])
        return cls(**data)


@dataclass
class TaskSet:
    prompts: list[Prompt]
    n_digits: int
    max_len: int
    seed: int = 0
    tiers: list[Tier] = field(default_factory=list)

    @property
    def eos_id(self) -> int:
        return self.n_digits

    @property
    def vocab_size(self) -> int:
        return self.n_digits + 1

    def __len__(self) -> int:
        return len(self.prompts)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_digits": self.n_digits,
                "max_len": self.max_len,
                "seed": self.seed,
                "tiers": [asdict(t) for t in self.tiers],
                "prompts": [asdict(p) for p in self.prompts],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "TaskSet":
        data = json.loads(text)
        return cls(
            prompts=[Prompt(**p) for p in data["prompts"]],
            n_digits=data["n_digits"],
            max_len=data["max_len"],
            seed=data["seed"],
            tiers=[Tier(**t) for t in data["tiers"]],
        )


def accepted_fraction(modulus: int, length: int, target: int, n_digits: int) -> float:
    """Exact share of the ``n_digits**length`` digit strings that are accepted."""
    hits = sum(
        1
        for seq in itertools.product(range(n_digits), repeat=length)
        if sum(seq) % modulus == target
    )
    return hits / n_digits**length


def build_task_set(config: TaskConfig, seed: int) -> TaskSet:
    rng = np.random.default_rng(seed)
    prompts = []
    prev_rate = None
    for k, tier in enumerate(config.tiers):
        if tier.modulus < 1 or tier.length < 0 or tier.count < 1:
            raise TaskGenerationError(f"invalid tier {tier}")
        if tier.length > config.max_len:
            raise TaskGenerationError(
                f"tier {k} needs {tier.length} tokens but max_len is {config.max_len}"
            )
        rates = []
        for _ in range(tier.count):
            target = int(rng.integers(tier.modulus))
            rate = accepted_fraction(tier.modulus, tier.length, target, config.n_digits)
            if rate == 0.0:
                raise TaskGenerationError(
                    f"tier {k}: no answer of length {tier.length} has digit sum "
                    f"= {target} mod {tier.modulus}"
                )
            rates.append(rate)
            prompts.append(Prompt(len(prompts), k, tier.modulus, tier.length, target))
        mean_rate = float(np.mean(rates))
        if prev_rate is not None and mean_rate > prev_rate + 1e-12:
            raise TaskGenerationError("tiers must be ordered from easiest to hardest")
        prev_rate = mean_rate
    return TaskSet(prompts, config.n_digits, config.max_len, seed, list(config.tiers))


def verify_rollout(task_set: TaskSet, prompt_id: int, tokens: Sequence[int]) -> int:
    if not 0 <= prompt_id < len(task_set.prompts):
        raise KeyError(f"unknown prompt id {prompt_id}")
    prompt = task_set.prompts[prompt_id]
    digits = list(tokens)
    if digits and digits[-1] == task_set.eos_id:
        digits = digits[:-1]
    if len(digits) != prompt.length:
        return 0
    if any(not 0 <= d < task_set.n_digits for d in digits):
        return 0
    return int(sum(digits) % prompt.modulus == prompt.target)


def greedy_solve_rate(task_set: TaskSet, params: PolicyParams, prompt_ids=None) -> float:
    """Share of prompts solved by temperature-0 decoding."""
    ids = np.arange(len(task_set)) if prompt_ids is None else np.asarray(prompt_ids)
    tokens, _, lengths = sample_tokens(params, ids, np.zeros((len(ids), params.max_len)), greedy=True)
    hits = [verify_rollout(task_set, int(p), tokens[i, : lengths[i]]) for i, p in enumerate(ids)]
    return float(np.mean(hits))


def difficulty_profile(
    task_set: TaskSet, params: PolicyParams, n_samples: int, seed: int
) -> dict[int, float]:
    """Monte-Carlo solve rate per tier, ``n_samples`` rollouts per tier."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    out = {}
    for k in sorted({p.tier for p in task_set.prompts}):
        ids = np.array([p.id for p in task_set.prompts if p.tier == k])
        chosen = ids[np.arange(n_samples) % len(ids)]
        tokens, _, lengths = sample_tokens(params, chosen, rng.random((n_samples, params.max_len)))
        hits = [
            verify_rollout(task_set, int(pid), tokens[i, : lengths[i]])
            for i, pid in enumerate(chosen)
        ]
        out[k] = float(np.mean(hits))
    return out
