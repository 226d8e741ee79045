import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grpolab.policy import (
    ClipConfig,
    PolicyConfig,
    PolicyParams,
    Rollout,
    TokenBatch,
    finite_diff_gradient,
    forward_dist,
    grad_surrogate,
    policy_init,
    sample_rollout,
    sequence_log_probs,
    surrogate_objective,
    token_entropy,
)

CFG = PolicyConfig(n_prompts=3, vocab_size=4, max_len=3, hidden=8)


def rel_err(a, b, floor=1e-8):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def small_batch(params, rng, n=2, perturb=0.0):
    """Rollouts sampled from a perturbed copy, so ratios differ from 1."""
    behaviour = params.map(lambda a: a + perturb * rng.standard_normal(a.shape))
    rollouts = [sample_rollout(behaviour, int(rng.integers(CFG.n_prompts)), rng) for _ in range(n)]
    return TokenBatch.from_rollouts(rollouts, params.vocab_size)


# --- init ------------------------------------------------------------------


def test_init_is_deterministic():
    assert policy_init(CFG, 7).to_bytes() == policy_init(CFG, 7).to_bytes()
    assert policy_init(CFG, 7).to_bytes() != policy_init(CFG, 8).to_bytes()


def test_init_range():
    p = policy_init(CFG, 0)
    s = 1 / math.sqrt(CFG.hidden)
    for name, arr in p.items():
        assert np.all(np.abs(arr) <= s), name


def test_init_rejects_bad_dims():
    with pytest.raises(ValueError):
        PolicyConfig(n_prompts=2, vocab_size=4, hidden=0)
    with pytest.raises(ValueError):
        PolicyConfig(n_prompts=2, vocab_size=1, hidden=8)


# --- forward / entropy -----------------------------------------------------


def test_zero_weights_give_uniform():
    probs = forward_dist(PolicyParams.zeros(CFG), 0, 0, CFG.bos_id)
    np.testing.assert_allclose(probs, 0.25, atol=1e-15)


def test_crafted_bias():
    p = PolicyParams.zeros(CFG)
    p.b_out[:] = [10.0, 0.0, 0.0, 0.0]
    probs = forward_dist(p, 1, 2, 0)
    assert probs[0] == pytest.approx(math.exp(10) / (math.exp(10) + 3), abs=1e-12)
    # e^10/(e^10+3) = 0.9998638; the commonly quoted 0.999861 is off in the 6th decimal
    assert probs[0] == pytest.approx(0.999861, abs=5e-6)


def test_forward_index_errors():
    p = policy_init(CFG, 0)
    with pytest.raises(IndexError):
        forward_dist(p, 3, 0, 0)
    with pytest.raises(IndexError):
        forward_dist(p, 0, 3, 0)


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.floats(0.1, 50.0))
def test_softmax_is_a_distribution(seed, scale):
    p = policy_init(CFG, seed).map(lambda a: a * scale)
    for t in range(CFG.max_len):
        probs = forward_dist(p, seed % CFG.n_prompts, t, CFG.bos_id)
        assert np.all(probs >= 0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert 0.0 <= token_entropy(probs) <= math.log(CFG.vocab_size) + 1e-12


def test_entropy_examples():
    assert token_entropy([0.25] * 4) == pytest.approx(math.log(4))
    assert token_entropy([0, 1, 0, 0]) == 0.0
    assert token_entropy([0.5, 0.5, 0, 0]) == pytest.approx(math.log(2))


# --- sampling / log-probs --------------------------------------------------


def test_sampling_is_deterministic_given_rng():
    p = policy_init(CFG, 1)
    a = sample_rollout(p, 0, np.random.default_rng(5))
    b = sample_rollout(p, 0, np.random.default_rng(5))
    assert a.tokens == b.tokens
    assert a.logprobs_old == b.logprobs_old


def test_forced_eos_stops_after_one_token():
    p = PolicyParams.zeros(CFG)
    p.b_out[CFG.eos_id] = 1e3
    r = sample_rollout(p, 0, np.random.default_rng(0))
    assert r.tokens == [CFG.eos_id]


def test_lengths_capped():
    p = PolicyParams.zeros(CFG)
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = sample_rollout(p, 0, rng)
        assert 1 <= len(r.tokens) <= CFG.max_len
        assert len(r.logprobs_old) == len(r.tokens)
        assert all(lp <= 0 for lp in r.logprobs_old)
        assert CFG.eos_id not in r.tokens[:-1]


def test_logprobs_reproduce_sampling_values():
    p = policy_init(CFG, 3)
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = sample_rollout(p, int(rng.integers(3)), rng)
        np.testing.assert_allclose(sequence_log_probs(p, r), r.logprobs_old, atol=1e-9)


def test_uniform_logprobs():
    r = Rollout(0, [1, 2, 0], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(sequence_log_probs(PolicyParams.zeros(CFG), r), -math.log(4))


def test_logprob_bad_token():
    with pytest.raises(IndexError):
        sequence_log_probs(PolicyParams.zeros(CFG), Rollout(0, [9], [0.0]))


def test_ascent_on_positive_rollout_raises_its_logprob():
    p = policy_init(CFG, 4)
    r = sample_rollout(p, 1, np.random.default_rng(4))
    batch = TokenBatch.from_rollouts([r], CFG.vocab_size)
    g = grad_surrogate(p, batch, [1.0], ClipConfig())
    lr = 1e-2
    stepped = PolicyParams(**{k: v - lr * getattr(g, k) for k, v in p.items()})
    assert sequence_log_probs(stepped, r).sum() > sequence_log_probs(p, r).sum()


# --- gradient --------------------------------------------------------------


@pytest.mark.parametrize("clip", [ClipConfig(0.2, 0.2), ClipConfig(0.2, 0.28)])
@pytest.mark.parametrize("entropy_coef", [0.0, 0.001, 0.5])
@pytest.mark.parametrize("aggregation", ["token", "rollout"])
def test_gradient_matches_finite_differences(clip, entropy_coef, aggregation):
    rng = np.random.default_rng(11)
    p = policy_init(CFG, 11)
    batch = small_batch(p, rng, n=2, perturb=0.3)
    adv = np.array([1.3, -0.7])
    kw = dict(clip=clip, entropy_coef=entropy_coef, aggregation=aggregation)
    analytic = grad_surrogate(p, batch, adv, **kw)
    numeric = finite_diff_gradient(p, batch, adv, h=1e-5, **kw)
    for name, a in analytic.items():
        assert np.max(rel_err(a, getattr(numeric, name))) <= 1e-4, name


def test_zero_advantage_zero_gradient():
    rng = np.random.default_rng(2)
    p = policy_init(CFG, 2)
    batch = small_batch(p, rng, n=3)
    g = grad_surrogate(p, batch, np.zeros(3), ClipConfig())
    for _, arr in g.items():
        assert np.all(arr == 0.0)


def test_clipped_tokens_have_no_policy_gradient():
    # a rollout whose ratio is far above 1 + eps with a positive advantage
    p = PolicyParams.zeros(CFG)
    r = Rollout(0, [1, 2, 3], [math.log(0.25) - 1.0] * 3)  # ratio = e > 1.2
    batch = TokenBatch.from_rollouts([r], CFG.vocab_size)
    g = grad_surrogate(p, batch, [1.0], ClipConfig())
    for _, arr in g.items():
        assert np.all(arr == 0.0)
    # same rollout with a negative advantage is not clipped
    g = grad_surrogate(p, batch, [-1.0], ClipConfig())
    assert np.any(g.b_out != 0.0)


def test_finite_diff_on_linear_loss_is_exact():
    p = policy_init(CFG, 0)
    coef = p.map(lambda a: np.arange(a.size, dtype=float).reshape(a.shape) / 7.0)

    def loss(q):
        return sum(float((getattr(coef, k) * v).sum()) for k, v in q.items())

    g = finite_diff_gradient(p, loss=loss, h=0.5)
    for name, arr in g.items():
        np.testing.assert_allclose(arr, getattr(coef, name), rtol=1e-12, atol=1e-12)


def test_finite_diff_rejects_zero_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(policy_init(CFG, 0), loss=lambda q: 0.0, h=0.0)


def test_shape_mismatch():
    p = policy_init(CFG, 0)
    batch = small_batch(p, np.random.default_rng(0), n=2)
    with pytest.raises(ValueError):
        surrogate_objective(p, batch, [1.0, 2.0, 3.0], ClipConfig())
