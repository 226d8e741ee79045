"""Training-dynamics metrics and metric files.

Per step we record reward, token entropy, the share of all-solved and
none-solved groups, the log-probability gain of correct rollouts after the
update, and the per-accuracy mean of the group covariance between
length-normalized log-probability and advantage.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

# weight on the running average, not on the new sample
EMA_FACTOR = 0.7
EMA_CONVENTION = "s_t = factor * s_{t-1} + (1 - factor) * x_t"
COVARIANCE_WINDOW = 40

SCALAR_FIELDS = (
    "step",
    "mean_train_reward",
    "mean_token_entropy",
    "solved_all_fraction",
    "solved_none_fraction",
    "pos_logprob_increment",
    "validation_accuracy",
    "ema_train_reward",
    "ema_validation_accuracy",
    "max_ratio_deviation",
    "mean_rollout_length",
    "skipped_updates",
)
INT_FIELDS = {"step", "skipped_updates"}


@dataclass
class MetricsRecord:
    step: int
    mean_train_reward: float
    mean_token_entropy: float
    solved_all_fraction: float
    solved_none_fraction: float
    pos_logprob_increment: float | None
    # accuracy numerator k (p = k/G) -> (mean covariance, number of groups)
    covariance_bins: dict[int, tuple[float, int]] = field(default_factory=dict)
    validation_accuracy: float | None = None
    ema_train_reward: float | None = None
    ema_validation_accuracy: float | None = None
    max_ratio_deviation: float = 0.0
    mean_rollout_length: float = 0.0
    skipped_updates: int = 0


class GroupCovariance(NamedTuple):
    step: int
    accuracy: float
    covariance: float


def length_normalized_logprob(rollout_logprobs: Sequence[float]) -> float:
    if len(rollout_logprobs) == 0:
        raise ValueError("empty rollout has no length-normalized log-probability")
    return float(np.mean(rollout_logprobs))


def group_covariance(norm_logprobs: Sequence[float], advantages: Sequence[float]) -> float:
    """Population covariance (divide by G) between confidence and advantage."""
    ell = np.asarray(norm_logprobs, dtype=float)
    adv = np.asarray(advantages, dtype=float)
    if ell.shape != adv.shape:
        raise ValueError(f"length mismatch: {ell.shape} vs {adv.shape}")
    if ell.size < 2:
        raise ValueError("need at least two rollouts")
    # a constant factor has exactly zero covariance; skip the rounding in its mean
    if np.ptp(ell) == 0.0 or np.ptp(adv) == 0.0:
        return 0.0
    return float(np.mean((ell - ell.mean()) * (adv - adv.mean())))


def binned_covariance(
    groups: Iterable[GroupCovariance], window_steps: int = COVARIANCE_WINDOW
) -> dict[float, float]:
    """Mean group covariance per accuracy value, over steps ``< window_steps``."""
    sums: dict[float, list[float]] = {}
    for g in groups:
        if g.step >= window_steps:
            continue
        sums.setdefault(g.accuracy, []).append(g.covariance)
    return {p: float(np.mean(v)) for p, v in sorted(sums.items())}


def binned_covariance_from_records(
    records: Sequence[MetricsRecord], group_size: int, window_steps: int = COVARIANCE_WINDOW
) -> dict[float, float]:
    """Same aggregate as :func:`binned_covariance`, rebuilt from per-step bins."""
    totals: dict[int, list[float]] = {}
    for rec in records:
        if rec.step >= window_steps:
            continue
        for k, (mean, count) in rec.covariance_bins.items():
            acc = totals.setdefault(k, [0.0, 0])
            acc[0] += mean * count
            acc[1] += count
    return {k / group_size: s / n for k, (s, n) in sorted(totals.items()) if n}


def solved_proportions(accuracies: Sequence[float]) -> tuple[float, float]:
    acc = np.asarray(accuracies, dtype=float)
    if acc.size == 0:
        raise ValueError("empty batch")
    return float(np.mean(acc == 1.0)), float(np.mean(acc == 0.0))


def positive_logprob_increment(old_logprob_sums, new_logprob_sums) -> float | None:
    """Mean over correct rollouts of ``log pi_new(y) - log pi_old(y)``.

    Both arguments hold one summed sequence log-probability per correct
    rollout.  Returns ``None`` when there are no correct rollouts.
    """
    old = np.asarray(old_logprob_sums, dtype=float)
    new = np.asarray(new_logprob_sums, dtype=float)
    if old.shape != new.shape:
        raise ValueError("old and new log-probabilities must align")
    if old.size == 0:
        return None
    return float(np.mean(new - old))


def ema_smooth(series: Sequence[float], factor: float = EMA_FACTOR) -> list[float]:
    if not 0.0 <= factor < 1.0:
        raise ValueError(f"factor must lie in [0, 1), got {factor}")
    if len(series) == 0:
        raise ValueError("cannot smooth an empty series")
    out = [float(series[0])]
    for x in series[1:]:
        out.append(ema_update(out[-1], x, factor))
    return out


def ema_update(previous: float | None, x: float, factor: float = EMA_FACTOR) -> float:
    if previous is None:
        return float(x)
    return factor * previous + (1.0 - factor) * float(x)


# --------------------------------------------------------------------------- #
# metric files
# --------------------------------------------------------------------------- #


def _bin_columns(group_size: int) -> list[str]:
    cols = []
    for k in range(1, group_size):
        cols += [f"cov_p_{k}of{group_size}", f"n_p_{k}of{group_size}"]
    return cols


def columns(group_size: int) -> list[str]:
    return list(SCALAR_FIELDS) + _bin_columns(group_size)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _record_row(rec: MetricsRecord, group_size: int) -> dict:
    row = {name: getattr(rec, name) for name in SCALAR_FIELDS}
    for k in range(1, group_size):
        mean, count = rec.covariance_bins.get(k, (None, 0))
        row[f"cov_p_{k}of{group_size}"] = mean
        row[f"n_p_{k}of{group_size}"] = count
    return row


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in INT_FIELDS or name.startswith("n_p_"):
        return int(text)
    return float(text)


def _row_to_record(row: dict, group_size: int) -> MetricsRecord:
    kwargs = {name: _parse(name, row.get(name, "")) for name in SCALAR_FIELDS}
    bins = {}
    for k in range(1, group_size):
        mean = _parse("cov", row.get(f"cov_p_{k}of{group_size}", ""))
        count = _parse("n_p_", row.get(f"n_p_{k}of{group_size}", "") or "0")
        if count:
            bins[k] = (mean, count)
    kwargs["covariance_bins"] = bins
    return MetricsRecord(**kwargs)


def write_metrics(
    records: Sequence[MetricsRecord],
    path: str | Path,
    fmt: str = "csv",
    group_size: int = 8,
    header: dict | None = None,
) -> Path:
    """Write one row (csv) or one object (jsonl) per step.

    ``header`` entries are written as ``# key: <json>`` comment lines ahead
    of the CSV column row.  JSON-lines files carry records only.
    """
    path = Path(path)
    meta = {"group_size": group_size, "ema_factor": EMA_FACTOR, "ema_convention": EMA_CONVENTION}
    meta.update(header or {})
    if fmt == "csv":
        buf = io.StringIO()
        for key, value in meta.items():
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.DictWriter(buf, fieldnames=columns(group_size), lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _fmt(v) for k, v in _record_row(rec, group_size).items()})
        path.write_text(buf.getvalue())
    elif fmt == "jsonl":
        lines = [json.dumps(_record_row(rec, group_size)) + "\n" for rec in records]
        path.write_text("".join(lines))
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")
    return path


def read_metrics(path: str | Path) -> tuple[dict, list[MetricsRecord]]:
    """Inverse of :func:`write_metrics`; format is picked from the suffix."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".jsonl":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines:
            return {}, []
        G = _group_size_from_keys(lines[0])
        return {"group_size": G}, [_jsonl_record(obj, G) for obj in lines]
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    if not body:
        raise ValueError(f"{path}: no column header")
    G = meta.get("group_size", 8)
    reader = csv.DictReader(body)
    return meta, [_row_to_record(row, G) for row in reader]


def _jsonl_record(obj: dict, group_size: int) -> MetricsRecord:
    kwargs = {}
    for name in SCALAR_FIELDS:
        v = obj.get(name)
        kwargs[name] = None if v is None else (int(v) if name in INT_FIELDS else float(v))
    bins = {}
    for k in range(1, group_size):
        count = obj.get(f"n_p_{k}of{group_size}") or 0
        if count:
            bins[k] = (float(obj[f"cov_p_{k}of{group_size}"]), int(count))
    kwargs["covariance_bins"] = bins
    return MetricsRecord(**kwargs)


def accuracy_label(k: int, group_size: int) -> str:
    return str(Fraction(k, group_size))


def _group_size_from_keys(obj: dict) -> int:
    for key in obj:
        if key.startswith("n_p_"):
            return int(key.rsplit("of", 1)[1])
    return 2
