"""Tiny autoregressive softmax policy with hand-written gradients.

The next-token distribution depends on the prompt id, the position and the
previous token only::

    h      = tanh(E_prompt[x] + E_pos[t] + E_prev[y_{t-1}] + b_hidden)
    logits = h @ W_out + b_out

which is the one-hidden-layer MLP over concatenated one-hot inputs, written
as embedding lookups.  The last vocabulary entry is the end-of-sequence token
and the previous-token table has one extra row for the start symbol.

Token batches are stored flat (one row per generated token) so that forward
passes, the clipped surrogate and its gradient are all vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

PARAM_NAMES = ("prompt_emb", "pos_emb", "prev_emb", "b_hidden", "w_out", "b_out")


@dataclass(frozen=True)
class PolicyConfig:
    n_prompts: int
    vocab_size: int = 5
    max_len: int = 3
    hidden: int = 16

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError(f"hidden width must be >= 1, got {self.hidden}")
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.max_len < 1 or self.n_prompts < 1:
            raise ValueError("max_len and n_prompts must be >= 1")

    @property
    def eos_id(self) -> int:
        return self.vocab_size - 1

    @property
    def bos_id(self) -> int:
        # index into prev_emb only; never emitted
        return self.vocab_size

    def shapes(self) -> dict[str, tuple[int, ...]]:
        H, V = self.hidden, self.vocab_size
        return {
            "prompt_emb": (self.n_prompts, H),
            "pos_emb": (self.max_len, H),
            "prev_emb": (V + 1, H),
            "b_hidden": (H,),
            "w_out": (H, V),
            "b_out": (V,),
        }


@dataclass
class PolicyParams:
    """Weight tensors of the policy.  Also used to hold gradients."""

    prompt_emb: np.ndarray
    pos_emb: np.ndarray
    prev_emb: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    @classmethod
    def zeros(cls, config: PolicyConfig) -> "PolicyParams":
        return cls(**{k: np.zeros(s) for k, s in config.shapes().items()})

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams(**{k: np.zeros_like(v) for k, v in self.items()})

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "PolicyParams":
        return PolicyParams(**{k: fn(v) for k, v in self.items()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for _, v in self.items())

    def to_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(v).tobytes() for _, v in self.items())

    @property
    def n_prompts(self) -> int:
        return self.prompt_emb.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.b_out.shape[0]

    @property
    def max_len(self) -> int:
        return self.pos_emb.shape[0]


def policy_init(config: PolicyConfig, seed: int) -> PolicyParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights from a seeded generator; zero biases."""
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(config.hidden)
    arrays = {}
    for name, shape in config.shapes().items():
        if name.startswith("b_"):
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.uniform(-s, s, size=shape)
    return PolicyParams(**arrays)


# --------------------------------------------------------------------------- #
# forward pass
# --------------------------------------------------------------------------- #


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _forward(params: PolicyParams, prompt, pos, prev):
    pre = params.prompt_emb[prompt] + params.pos_emb[pos] + params.prev_emb[prev] + params.b_hidden
    h = np.tanh(pre)
    logp = _log_softmax(h @ params.w_out + params.b_out)
    return h, logp


def _check_index(value: int, bound: int, what: str) -> None:
    if not 0 <= value < bound:
        raise IndexError(f"{what} {value} out of range [0, {bound})")


def forward_dist(params: PolicyParams, prompt_id: int, position: int, prev_token: int) -> np.ndarray:
    """Next-token probabilities.  ``prev_token == vocab_size`` is the start symbol."""
    _check_index(prompt_id, params.n_prompts, "prompt_id")
    _check_index(position, params.max_len, "position")
    _check_index(prev_token, params.vocab_size + 1, "prev_token")
    _, logp = _forward(params, np.array([prompt_id]), np.array([position]), np.array([prev_token]))
    return np.exp(logp[0])


def token_entropy(dist: Sequence[float]) -> float:
    p = np.asarray(dist, dtype=float)
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


# --------------------------------------------------------------------------- #
# rollouts
# --------------------------------------------------------------------------- #


@dataclass
class Rollout:
    prompt_id: int
    tokens: list[int]
    logprobs_old: list[float]
    reward: int | None = None


@dataclass
class TokenBatch:
    """Flat per-token view of a list of rollouts."""

    rollout_index: np.ndarray
    prompt: np.ndarray
    pos: np.ndarray
    prev: np.ndarray
    token: np.ndarray
    logp_old: np.ndarray
    lengths: np.ndarray
    rewards: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n_rollouts(self) -> int:
        return len(self.lengths)

    @property
    def n_tokens(self) -> int:
        return len(self.token)

    @classmethod
    def from_rollouts(cls, rollouts: Sequence[Rollout], bos_id: int) -> "TokenBatch":
        if not rollouts:
            raise ValueError("cannot build a batch from zero rollouts")
        idx, prompt, pos, prev, tok, old = [], [], [], [], [], []
        for i, r in enumerate(rollouts):
            T = len(r.tokens)
            if len(r.logprobs_old) != T:
                raise ValueError("logprobs_old must align with tokens")
            idx.extend([i] * T)
            prompt.extend([r.prompt_id] * T)
            pos.extend(range(T))
            prev.extend([bos_id] + list(r.tokens[:-1]) if T else [])
            tok.extend(r.tokens)
            old.extend(r.logprobs_old)
        rewards = np.array([-1 if r.reward is None else r.reward for r in rollouts])
        return cls(
            rollout_index=np.array(idx, dtype=np.intp),
            prompt=np.array(prompt, dtype=np.intp),
            pos=np.array(pos, dtype=np.intp),
            prev=np.array(prev, dtype=np.intp),
            token=np.array(tok, dtype=np.intp),
            logp_old=np.array(old, dtype=float),
            lengths=np.array([len(r.tokens) for r in rollouts], dtype=np.intp),
            rewards=rewards,
        )

    def select(self, rollout_ids: np.ndarray) -> "TokenBatch":
        """Sub-batch made of the given rollouts (re-indexed from 0)."""
        rollout_ids = np.asarray(rollout_ids, dtype=np.intp)
        remap = np.full(self.n_rollouts, -1, dtype=np.intp)
        remap[rollout_ids] = np.arange(len(rollout_ids))
        keep = remap[self.rollout_index] >= 0
        return TokenBatch(
            rollout_index=remap[self.rollout_index[keep]],
            prompt=self.prompt[keep],
            pos=self.pos[keep],
            prev=self.prev[keep],
            token=self.token[keep],
            logp_old=self.logp_old[keep],
            lengths=self.lengths[rollout_ids],
            rewards=self.rewards[rollout_ids] if len(self.rewards) else self.rewards,
        )


def sample_tokens(
    params: PolicyParams, prompt_ids: np.ndarray, uniforms: np.ndarray, greedy: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized autoregressive sampling by inverse-CDF on pre-drawn uniforms.

    Returns ``(tokens, logprobs, lengths)`` with tokens/logprobs padded to
    ``(B, max_len)``.  A row stops after emitting end-of-sequence.
    """
    prompt_ids = np.asarray(prompt_ids, dtype=np.intp)
    B, T = len(prompt_ids), params.max_len
    V = params.vocab_size
    eos = V - 1
    tokens = np.full((B, T), -1, dtype=np.intp)
    logps = np.zeros((B, T))
    lengths = np.zeros(B, dtype=np.intp)
    prev = np.full(B, V, dtype=np.intp)
    alive = np.ones(B, dtype=bool)
    for t in range(T):
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            break
        _, logp = _forward(params, prompt_ids[rows], np.full(rows.size, t), prev[rows])
        if greedy:
            tok = logp.argmax(axis=1)
        else:
            cdf = np.cumsum(np.exp(logp), axis=1)
            tok = np.minimum((uniforms[rows, t][:, None] >= cdf).sum(axis=1), V - 1)
        tokens[rows, t] = tok
        logps[rows, t] = logp[np.arange(rows.size), tok]
        lengths[rows] += 1
        prev[rows] = tok
        alive[rows[tok == eos]] = False
    return tokens, logps, lengths


def rollouts_from_arrays(prompt_ids, tokens, logps, lengths) -> list[Rollout]:
    return [
        Rollout(int(pid), tokens[i, :n].tolist(), logps[i, :n].tolist())
        for i, (pid, n) in enumerate(zip(prompt_ids, lengths))
    ]


def sample_rollout(params: PolicyParams, prompt_id: int, rng: np.random.Generator) -> Rollout:
    _check_index(prompt_id, params.n_prompts, "prompt_id")
    pid = np.array([prompt_id])
    out = sample_tokens(params, pid, rng.random((1, params.max_len)))
    return rollouts_from_arrays(pid, *out)[0]


def sample_group(
    params: PolicyParams, prompt_id: int, n: int, rng: np.random.Generator
) -> list[Rollout]:
    _check_index(prompt_id, params.n_prompts, "prompt_id")
    pid = np.full(n, prompt_id)
    out = sample_tokens(params, pid, rng.random((n, params.max_len)))
    return rollouts_from_arrays(pid, *out)


def token_log_probs(params: PolicyParams, batch: TokenBatch) -> np.ndarray:
    if batch.n_tokens and (batch.token.min() < 0 or batch.token.max() >= params.vocab_size):
        raise IndexError("token id out of range")
    _, logp = _forward(params, batch.prompt, batch.pos, batch.prev)
    return logp[np.arange(batch.n_tokens), batch.token]


def sequence_log_probs(params: PolicyParams, rollout: Rollout) -> np.ndarray:
    batch = TokenBatch.from_rollouts([rollout], params.vocab_size)
    return token_log_probs(params, batch)


def mean_token_entropy(params: PolicyParams, batch: TokenBatch) -> float:
    """Mean entropy of the next-token distributions along the batch's tokens."""
    _, logp = _forward(params, batch.prompt, batch.pos, batch.prev)
    return float(-(np.exp(logp) * logp).sum(axis=1).mean())


# --------------------------------------------------------------------------- #
# clipped surrogate and its gradient
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ClipConfig:
    eps_low: float = 0.2
    eps_high: float = 0.2

    def __post_init__(self):
        if not 0 < self.eps_low <= self.eps_high < 1:
            raise ValueError("need 0 < eps_low <= eps_high < 1")


def _token_weights(batch: TokenBatch, aggregation: str) -> np.ndarray:
    if aggregation == "token":
        return np.full(batch.n_tokens, 1.0 / batch.n_tokens)
    if aggregation == "rollout":
        per_rollout = 1.0 / (batch.n_rollouts * batch.lengths)
        return per_rollout[batch.rollout_index]
    raise ValueError(f"unknown aggregation {aggregation!r}")


def _surrogate_parts(params, batch, advantages, clip, aggregation):
    advantages = np.asarray(advantages, dtype=float)
    if advantages.shape != (batch.n_rollouts,):
        raise ValueError(
            f"expected {batch.n_rollouts} rollout advantages, got shape {advantages.shape}"
        )
    if batch.n_tokens == 0:
        raise ValueError("batch has no tokens")
    h, logp = _forward(params, batch.prompt, batch.pos, batch.prev)
    rows = np.arange(batch.n_tokens)
    logp_tok = logp[rows, batch.token]
    ratio = np.exp(logp_tok - batch.logp_old)
    adv = advantages[batch.rollout_index]
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high) * adv
    weights = _token_weights(batch, aggregation)
    return h, logp, ratio, adv, unclipped, clipped, weights


def surrogate_objective(
    params: PolicyParams,
    batch: TokenBatch,
    advantages: Sequence[float],
    clip: ClipConfig,
    entropy_coef: float = 0.0,
    aggregation: str = "token",
) -> float:
    """Loss to minimize: minus the aggregated clipped term minus the entropy bonus."""
    _, logp, _, _, unclipped, clipped, w = _surrogate_parts(
        params, batch, advantages, clip, aggregation
    )
    loss = -(w * np.minimum(unclipped, clipped)).sum()
    if entropy_coef:
        ent = -(np.exp(logp) * logp).sum(axis=1)
        loss -= entropy_coef * (w * ent).sum()
    return float(loss)


def grad_surrogate(
    params: PolicyParams,
    batch: TokenBatch,
    advantages: Sequence[float],
    clip: ClipConfig,
    entropy_coef: float = 0.0,
    aggregation: str = "token",
) -> PolicyParams:
    """Exact gradient of :func:`surrogate_objective` by manual backprop."""
    h, logp, ratio, adv, unclipped, clipped, w = _surrogate_parts(
        params, batch, advantages, clip, aggregation
    )
    n = batch.n_tokens
    probs = np.exp(logp)

    # min() follows the unclipped branch whenever it is the smaller one;
    # otherwise the clipped branch is constant in theta.
    active = unclipped <= clipped
    d_logp_tok = -w * active * adv * ratio
    d_logits = -probs * d_logp_tok[:, None]
    d_logits[np.arange(n), batch.token] += d_logp_tok

    if entropy_coef:
        ent = -(probs * logp).sum(axis=1)
        # dH/dlogits = -p * (log p + H)
        d_logits += entropy_coef * w[:, None] * probs * (logp + ent[:, None])

    grad = params.zeros_like()
    grad.w_out = h.T @ d_logits
    grad.b_out = d_logits.sum(axis=0)
    d_pre = (d_logits @ params.w_out.T) * (1.0 - h * h)
    grad.b_hidden = d_pre.sum(axis=0)
    np.add.at(grad.prompt_emb, batch.prompt, d_pre)
    np.add.at(grad.pos_emb, batch.pos, d_pre)
    np.add.at(grad.prev_emb, batch.prev, d_pre)
    return grad


def finite_diff_gradient(
    params: PolicyParams,
    batch: TokenBatch | None = None,
    advantages: Sequence[float] | None = None,
    clip: ClipConfig | None = None,
    entropy_coef: float = 0.0,
    h: float = 1e-5,
    aggregation: str = "token",
    loss: Callable[[PolicyParams], float] | None = None,
) -> PolicyParams:
    """Central-difference gradient, one parameter at a time.

    By default differentiates :func:`surrogate_objective`; pass ``loss`` to
    differentiate any other scalar function of the parameters.
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    if loss is None:
        clip = clip or ClipConfig()

        def loss(p):
            return surrogate_objective(p, batch, advantages, clip, entropy_coef, aggregation)

    work = params.copy()
    grad = params.zeros_like()
    for name, arr in work.items():
        g = getattr(grad, name)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss(work)
            flat[i] = orig - h
            f_minus = loss(work)
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
