"""Oracle and invariant suites behind the ``check`` command.

Each suite returns a :class:`SuiteResult`.  ``run_checks(fault=...)``
deliberately corrupts one component so the harness itself can be tested:
``fault="standardized"`` perturbs the direct standardization path that the
oracle-equivalence suite compares against the closed-form family.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import advantage as adv
from .advantage import AdvantageSpec, GroupAdvantages
from .env import TaskConfig, Tier, build_task_set
from .policy import (
    ClipConfig,
    PolicyConfig,
    TokenBatch,
    finite_diff_gradient,
    grad_surrogate,
    policy_init,
    sample_rollout,
)
from .presets import apply_preset, preset_spec
from .trainer import TrainConfig, init_state, optimizer_step, train


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _faulty_standardized(rewards) -> GroupAdvantages:
    out = adv.advantage_standardized(rewards)
    return replace(out, values=out.values * (1.0 + 1e-6) + 1e-6)


def oracle_equivalence(
    standardize: Callable = adv.advantage_standardized, max_exhaustive: int = 12, samples: int = 2000
) -> SuiteResult:
    """beta = 0.5 family vs direct standardization, every G in 2..16."""
    rng = np.random.default_rng(0)
    worst, n = 0.0, 0
    for G in range(2, 17):
        spec = AdvantageSpec.parametric(0.5, 0.5, group_size=G)
        if G <= max_exhaustive:
            # one representative per count of correct rollouts is not enough:
            # positions matter for the dispatch, so enumerate every vector
            vectors = itertools.product((0, 1), repeat=G)
        else:
            vectors = (rng.integers(0, 2, G) for _ in range(samples))
        for r in vectors:
            r = np.asarray(r)
            if not 0 < r.sum() < G:
                continue
            a = adv.assign_group_advantages(r, spec).values
            b = standardize(r).values
            worst = max(worst, float(np.max(np.abs(a - b))))
            n += 1
    return SuiteResult("oracle_equivalence", worst <= 1e-9, f"{n} groups, max |diff| = {worst:.2e}")


def collapse_checks() -> SuiteResult:
    bad = 0
    for G in range(2, 13):
        zero = AdvantageSpec.parametric(0.0, 0.0, group_size=G)
        const = AdvantageSpec.constant(G)
        grpo = preset_spec("grpo", G)
        asym_half = replace(preset_spec("asym", G), beta_pos=0.5, beta_neg=0.5)
        for r in itertools.product((0, 1), repeat=G):
            if not 0 < sum(r) < G:
                continue
            if not np.array_equal(
                adv.assign_group_advantages(r, zero).values,
                adv.assign_group_advantages(r, const).values,
            ):
                bad += 1
            if not np.array_equal(
                adv.assign_group_advantages(r, asym_half).values,
                adv.assign_group_advantages(r, grpo).values,
            ):
                bad += 1
    return SuiteResult("collapse", bad == 0, f"{bad} mismatching groups")


def flip_boundary() -> SuiteResult:
    G, beta = 8, 0.5
    expected_end = 2 * math.sqrt(7) - math.sqrt(3)
    errs = [
        abs(adv.advantage_flipped(7 / 8, 1, beta, G) - math.sqrt(7)),
        abs(adv.advantage_flipped(1.0, 1, beta, G) - expected_end),
        abs(adv.advantage_flipped(0.0, 0, beta, G) + expected_end),
        abs(expected_end - 3.559452) - 5e-7 if abs(expected_end - 3.559452) > 5e-7 else 0.0,
    ]
    for k in range(1, G):
        p = k / G
        errs.append(abs(adv.advantage_flipped(p, 1, beta, G) - adv.advantage_parametric(1 - p, 1, beta, beta)))
        errs.append(abs(adv.advantage_flipped(p, 0, beta, G) - adv.advantage_parametric(1 - p, 0, beta, beta)))
    worst = max(errs)
    return SuiteResult("flip_boundary", worst <= 1e-12, f"max error {worst:.2e}")


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


GRADIENT_MODES = (
    AdvantageSpec.constant(4),
    AdvantageSpec.standardized(4),
    AdvantageSpec.parametric(0.5, 0.5, group_size=4),
    AdvantageSpec.parametric(0.9, 0.4, group_size=4),
    AdvantageSpec.parametric(0.5, 0.5, flip_pos=True, group_size=4),
    AdvantageSpec.parametric(0.5, 0.5, flip_neg=True, group_size=4),
)


def gradient_check(n_batches: int = 20, h: float = 1e-5) -> SuiteResult:
    """Analytic vs central-difference gradient on randomized small batches."""
    cfg = PolicyConfig(n_prompts=2, vocab_size=4, max_len=3, hidden=5)
    clips = (ClipConfig(0.2, 0.2), ClipConfig(0.2, 0.28), ClipConfig(0.1, 0.1))
    worst = 0.0
    for i in range(n_batches):
        rng = np.random.default_rng(1000 + i)
        params = policy_init(cfg, 1000 + i)
        # sample from a perturbed behaviour policy so ratios are away from 1
        behaviour = params.map(lambda a: a + 0.4 * rng.standard_normal(a.shape))
        spec = GRADIENT_MODES[i % len(GRADIENT_MODES)]
        rollouts = [sample_rollout(behaviour, int(rng.integers(2)), rng) for _ in range(spec.group_size)]
        rewards = rng.integers(0, 2, spec.group_size)
        rewards[0], rewards[1] = 1, 0
        advantages = adv.assign_group_advantages(rewards, spec).values
        batch = TokenBatch.from_rollouts(rollouts, cfg.vocab_size)
        clip = clips[i % len(clips)]
        coef = (0.0, 0.001)[i % 2]
        analytic = grad_surrogate(params, batch, advantages, clip, coef)
        numeric = finite_diff_gradient(params, batch, advantages, clip, coef, h=h)
        for name, a in analytic.items():
            worst = max(worst, float(np.max(relative_error(a, getattr(numeric, name)))))
    return SuiteResult("gradient", worst <= 1e-4, f"{n_batches} batches, max rel err {worst:.2e}")


def degenerate_neutrality() -> SuiteResult:
    """All-correct / all-wrong groups move nothing unless the mode is constant."""
    task = build_task_set(TaskConfig(tiers=(Tier(2, 2, 2),), n_digits=4, max_len=2), 0)
    cfg = PolicyConfig(len(task), task.vocab_size, task.max_len, hidden=6)
    params = policy_init(cfg, 3)
    rng = np.random.default_rng(3)
    rollouts = [sample_rollout(params, 0, rng) for _ in range(8)]
    batch = TokenBatch.from_rollouts(rollouts, cfg.vocab_size)
    failures = []
    for rewards in ([1] * 8, [0] * 8):
        for spec in (
            AdvantageSpec.standardized(8),
            AdvantageSpec.parametric(0.5, 0.5),
            AdvantageSpec.parametric(0.9, 0.4),
            AdvantageSpec.constant(8),
        ):
            values = adv.assign_group_advantages(rewards, spec).values
            base = TrainConfig(advantage_spec=spec, hidden=6)
            state = replace(init_state(task, base), params=params.copy())
            grad = grad_surrogate(params, batch, values, base.clip)
            new, _ = optimizer_step(state, grad, base)
            moved = new.params.to_bytes() != params.to_bytes()
            if moved != (spec.mode is adv.Mode.CONSTANT):
                failures.append(f"{spec.mode.value}{rewards[:1]}")
    return SuiteResult("degenerate_neutrality", not failures, ", ".join(failures) or "ok")


def determinism() -> SuiteResult:
    task = build_task_set(TaskConfig(), 0)
    cfg = apply_preset("asym", TrainConfig(total_steps=5, learning_rate=1e-2, seed=4))
    _, a = train(task, cfg)
    _, b = train(task, cfg)
    same = a == b
    return SuiteResult("determinism", same, "identical records" if same else "records differ")


def run_checks(fault: str | None = None) -> list[SuiteResult]:
    if fault not in (None, "standardized"):
        raise ValueError(f"unknown fault {fault!r}")
    standardize = _faulty_standardized if fault == "standardized" else adv.advantage_standardized
    suites = [
        lambda: oracle_equivalence(standardize),
        collapse_checks,
        flip_boundary,
        gradient_check,
        degenerate_neutrality,
        determinism,
    ]
    results = []
    for suite in suites:
        t0 = time.perf_counter()
        res = suite()
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def format_table(results: list[SuiteResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<{width}}  result  time    detail"]
    for r in results:
        lines.append(
            f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.2f}s  {r.detail}"
        )
    return "\n".join(lines)
