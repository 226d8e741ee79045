"""Named training variants.

Each preset is a pure table entry: an advantage spec plus optional clipping
and entropy-bonus overrides applied on top of a base :class:`TrainConfig`.
"""

from __future__ import annotations

from dataclasses import replace

from .advantage import AdvantageSpec, Mode
from .trainer import TrainConfig

ENTROPY_BONUS = 0.001
CLIP_HIGH = 0.28

# name -> (mode, beta_pos, beta_neg, flip_pos, flip_neg, overrides)
PRESETS: dict[str, tuple] = {
    "reinforce": (Mode.CONSTANT, 0.0, 0.0, False, False, {}),
    "grpo": (Mode.PARAMETRIC, 0.5, 0.5, False, False, {}),
    "pos_only": (Mode.PARAMETRIC, 0.5, 0.0, False, False, {}),
    "neg_only": (Mode.PARAMETRIC, 0.0, 0.5, False, False, {}),
    "ent_increase": (Mode.PARAMETRIC, 0.5, 0.5, False, True, {}),
    "ent_decrease": (Mode.PARAMETRIC, 0.5, 0.5, True, False, {}),
    "asym": (Mode.PARAMETRIC, 0.9, 0.4, False, False, {}),
    "asym_symmetric": (Mode.PARAMETRIC, 0.7, 0.7, False, False, {}),
    "grpo_entreg": (Mode.PARAMETRIC, 0.5, 0.5, False, False, {"entropy_coef": ENTROPY_BONUS}),
    "grpo_cliphigher": (Mode.PARAMETRIC, 0.5, 0.5, False, False, {"eps_high": CLIP_HIGH}),
    "asym_cliphigher": (Mode.PARAMETRIC, 0.9, 0.3, False, False, {"eps_high": CLIP_HIGH}),
}


def preset_spec(name: str, group_size: int = 8) -> AdvantageSpec:
    try:
        mode, bp, bn, fp, fn, _ = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown variant {name!r}; choose from {sorted(PRESETS)}") from None
    return AdvantageSpec(mode, bp, bn, fp, fn, group_size)


def preset_overrides(name: str) -> dict:
    return dict(PRESETS[name][5])


def apply_preset(name: str, base: TrainConfig) -> TrainConfig:
    """``base`` with the variant's advantage spec and overrides applied."""
    spec = preset_spec(name, base.group_size)
    return replace(base, advantage_spec=spec, **preset_overrides(name))


def describe(name: str, group_size: int = 8) -> dict:
    """Expansion of a preset, as echoed into metric file headers."""
    return {"variant": name, **preset_spec(name, group_size).to_dict(), **preset_overrides(name)}
