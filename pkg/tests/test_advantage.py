import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grpolab.advantage import (
    AdvantageSpec,
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


def direct_standardize(rewards):
    """Reference: z-score with the population std, written out longhand."""
    G = len(rewards)
    mean = sum(rewards) / G
    var = sum((r - mean) ** 2 for r in rewards) / G
    return [(r - mean) / math.sqrt(var) for r in rewards]


mixed_groups = st.integers(2, 16).flatmap(
    lambda G: st.lists(st.integers(0, 1), min_size=G, max_size=G).filter(
        lambda r: 0 < sum(r) < len(r)
    )
)


# --- group_accuracy --------------------------------------------------------


@pytest.mark.parametrize(
    "rewards, expected",
    [([1, 0, 0, 1], 0.5), ([0] * 8, 0.0), ([1, 1, 0, 0, 0, 0, 0, 0], 0.25)],
)
def test_group_accuracy(rewards, expected):
    assert group_accuracy(rewards) == expected


@pytest.mark.parametrize("rewards", [[], [1], [0, 2], [0.5, 1]])
def test_group_accuracy_rejects_bad_groups(rewards):
    with pytest.raises(InvalidGroupError):
        group_accuracy(rewards)


# --- constant / standardized -----------------------------------------------


def test_constant():
    assert advantage_constant(1) == 1.0
    assert advantage_constant(0) == -1.0
    assert [advantage_constant(r) for r in [1, 0]] == [1.0, -1.0]


def test_standardized_quarter_accuracy():
    out = advantage_standardized([1, 1, 0, 0, 0, 0, 0, 0])
    assert not out.degenerate
    np.testing.assert_allclose(out.values[:2], 1.7320508075688772, atol=1e-6)
    np.testing.assert_allclose(out.values[2:], -0.5773502691896258, atol=1e-6)
    np.testing.assert_allclose(out.values, direct_standardize([1, 1, 0, 0, 0, 0, 0, 0]), atol=1e-12)


def test_standardized_pair_and_degenerate():
    np.testing.assert_allclose(advantage_standardized([1, 0]).values, [1.0, -1.0])
    out = advantage_standardized([1, 1, 1, 1])
    assert out.degenerate
    assert np.all(out.values == 0.0)


# --- parametric ------------------------------------------------------------


@pytest.mark.parametrize(
    "p, reward, bp, bn, expected",
    [
        (0.5, 1, 0.9, 0.4, 1.0),
        (0.5, 1, 0.0, 0.0, 1.0),
        (0.2, 1, 0.9, 0.0, 4.0**0.9),
        (0.75, 0, 0.0, 0.4, -(3.0**0.4)),
        (0.25, 1, 0.5, 0.5, math.sqrt(3.0)),
    ],
)
def test_parametric_values(p, reward, bp, bn, expected):
    assert advantage_parametric(p, reward, bp, bn) == pytest.approx(expected, abs=1e-12)


def test_parametric_known_decimals():
    assert advantage_parametric(0.2, 1, 0.9, 0.4) == pytest.approx(3.482202, abs=1e-6)
    assert advantage_parametric(0.75, 0, 0.9, 0.4) == pytest.approx(-1.551846, abs=1e-6)


def test_parametric_endpoints():
    assert advantage_parametric(1.0, 1, 0.5, 0.5) == 0.0
    assert advantage_parametric(1.0, 1, 0.0, 0.5) == 1.0
    assert advantage_parametric(0.0, 0, 0.5, 0.5) == 0.0
    assert advantage_parametric(0.0, 0, 0.5, 0.0) == -1.0
    with pytest.raises(UnreachableBranchError):
        advantage_parametric(0.0, 1, 0.5, 0.5)
    with pytest.raises(UnreachableBranchError):
        advantage_parametric(1.0, 0, 0.5, 0.5)


@given(mixed_groups)
def test_parametric_half_matches_standardization(rewards):
    spec = AdvantageSpec.parametric(0.5, 0.5, group_size=len(rewards))
    np.testing.assert_allclose(
        assign_group_advantages(rewards, spec).values, direct_standardize(rewards), atol=1e-9
    )


@given(mixed_groups)
def test_parametric_zero_is_reinforce(rewards):
    G = len(rewards)
    got = assign_group_advantages(rewards, AdvantageSpec.parametric(0.0, 0.0, group_size=G))
    want = assign_group_advantages(rewards, AdvantageSpec.constant(G))
    assert np.array_equal(got.values, want.values)


@given(
    st.floats(0.01, 0.98),
    st.floats(0.001, 0.01),
    st.floats(0.05, 2.0),
)
def test_monotone_in_accuracy(p, dp, beta):
    q = p + dp
    assert advantage_parametric(q, 1, beta, beta) < advantage_parametric(p, 1, beta, beta)
    assert abs(advantage_parametric(q, 0, beta, beta)) > abs(advantage_parametric(p, 0, beta, beta))


# --- flipped ---------------------------------------------------------------

SQRT7, SQRT3 = math.sqrt(7.0), math.sqrt(3.0)
V_END = 2 * SQRT7 - SQRT3  # 3.559452...


def test_flipped_boundary_values():
    assert advantage_flipped(7 / 8, 1, 0.5, 8) == pytest.approx(SQRT7, abs=1e-12)
    assert advantage_flipped(6 / 8, 1, 0.5, 8) == pytest.approx(SQRT3, abs=1e-12)
    assert advantage_flipped(1.0, 1, 0.5, 8) == pytest.approx(V_END, abs=1e-12)
    assert V_END == pytest.approx(3.559452, abs=1e-6)
    assert advantage_flipped(0.0, 0, 0.5, 8) == pytest.approx(-V_END, abs=1e-12)
    assert advantage_flipped(0.5, 1, 0.5, 8) == 1.0


def test_flipped_midpoint_off_grid():
    mid = advantage_flipped(15 / 16, 1, 0.5, 8, on_grid=False)
    assert mid == pytest.approx((SQRT7 + V_END) / 2, abs=1e-12)
    assert mid == pytest.approx(3.102601, abs=1e-6)
    with pytest.raises(ValueError):
        advantage_flipped(15 / 16, 1, 0.5, 8)


@pytest.mark.parametrize("G", range(3, 17))
@pytest.mark.parametrize("beta", [0.0, 0.3, 0.5, 0.9])
def test_flip_is_reflection_on_grid(G, beta):
    for k in range(1, G):
        p = k / G
        assert advantage_flipped(p, 1, beta, G) == advantage_parametric(1 - p, 1, beta, beta)
        assert advantage_flipped(p, 0, beta, G) == advantage_parametric(1 - p, 0, beta, beta)


@pytest.mark.parametrize("G", [3, 5, 8, 16])
def test_flipped_extension_is_continuous(G):
    beta = 0.5
    last, first = (G - 1) / G, 1 / G
    eps = 1e-9
    assert advantage_flipped(last + eps, 1, beta, G, on_grid=False) == pytest.approx(
        advantage_flipped(last, 1, beta, G), abs=1e-6
    )
    assert advantage_flipped(first - eps, 0, beta, G, on_grid=False) == pytest.approx(
        advantage_flipped(first, 0, beta, G), abs=1e-6
    )


def test_flipped_needs_three_rollouts():
    with pytest.raises(InvalidGroupError):
        advantage_flipped(0.5, 1, 0.5, 2)


# --- dispatch --------------------------------------------------------------


def test_assign_examples():
    out = assign_group_advantages([1, 0], AdvantageSpec.parametric(0.5, 0.5, group_size=2))
    np.testing.assert_allclose(out.values, [1.0, -1.0])

    r = [1, 1, 0, 0, 0, 0, 0, 0]
    a = assign_group_advantages(r, AdvantageSpec.standardized(8)).values
    b = assign_group_advantages(r, AdvantageSpec.parametric(0.5, 0.5)).values
    np.testing.assert_allclose(a, b, atol=1e-12)

    out = assign_group_advantages([1, 1, 1, 1], AdvantageSpec.constant(4))
    assert list(out.values) == [1.0, 1.0, 1.0, 1.0]
    assert not out.degenerate


def test_assign_checks_group_size():
    with pytest.raises(InvalidGroupError):
        assign_group_advantages([1, 0, 1], AdvantageSpec.parametric(0.5, 0.5, group_size=4))


def test_flip_only_in_parametric_mode():
    with pytest.raises(ValueError):
        AdvantageSpec(Mode.STANDARDIZED, flip_pos=True)


def test_degenerate_flags():
    G = 8
    assert assign_group_advantages([1] * G, AdvantageSpec.parametric(0.5, 0.5)).degenerate
    assert assign_group_advantages([0] * G, AdvantageSpec.parametric(0.9, 0.4)).degenerate
    # neg-only keeps the REINFORCE +1 for all-correct groups
    assert not assign_group_advantages([1] * G, AdvantageSpec.parametric(0.0, 0.5)).degenerate
    # the flipped positive curve is non-zero at p = 1
    flipped = assign_group_advantages([1] * G, AdvantageSpec.parametric(0.5, 0.5, flip_pos=True))
    assert not flipped.degenerate
    np.testing.assert_allclose(flipped.values, V_END)


specs = st.builds(
    AdvantageSpec.parametric,
    st.sampled_from([0.0, 0.3, 0.5, 0.9]),
    st.sampled_from([0.0, 0.4, 0.5, 0.7]),
    flip_pos=st.booleans(),
    flip_neg=st.booleans(),
    group_size=st.just(8),
)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=8), specs)
def test_sign_and_class_equality(rewards, spec):
    out = assign_group_advantages(rewards, spec)
    vals = out.values
    for r, v in zip(rewards, vals):
        if v != 0:
            assert (v > 0) == (r == 1)
    for cls in (0, 1):
        same = {v for r, v in zip(rewards, vals) if r == cls}
        assert len(same) <= 1


def test_exhaustive_small_groups():
    for G in range(2, 9):
        spec = AdvantageSpec.parametric(0.5, 0.5, group_size=G)
        for rewards in itertools.product([0, 1], repeat=G):
            if 0 < sum(rewards) < G:
                np.testing.assert_allclose(
                    assign_group_advantages(rewards, spec).values,
                    advantage_standardized(rewards).values,
                    atol=1e-9,
                )
