import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grpolab.diagnostics import (
    GroupCovariance,
    MetricsRecord,
    binned_covariance,
    binned_covariance_from_records,
    ema_smooth,
    ema_update,
    group_covariance,
    length_normalized_logprob,
    positive_logprob_increment,
    read_metrics,
    solved_proportions,
    write_metrics,
)


def test_length_normalized_logprob():
    assert length_normalized_logprob([-0.5, -1.5]) == -1.0
    assert length_normalized_logprob([-1.386294] * 3) == pytest.approx(-1.386294)
    assert length_normalized_logprob([-2.3]) == -2.3
    with pytest.raises(ValueError):
        length_normalized_logprob([])


def test_group_covariance_examples():
    assert group_covariance([-1.0, -2.0], [1.0, -1.0]) == pytest.approx(0.5)
    assert group_covariance([-1.0, -2.0, -0.3], [0.7, 0.7, 0.7]) == 0.0
    ell = np.array([-1.0, -2.5, -0.2, -0.9])
    assert group_covariance(ell, ell - ell.mean()) == pytest.approx(np.var(ell))
    with pytest.raises(ValueError):
        group_covariance([1.0, 2.0], [1.0])


floats = st.floats(-5, 5, allow_nan=False)


@given(st.lists(st.tuples(floats, floats), min_size=2, max_size=16), st.floats(-4, 4))
def test_covariance_scales_with_advantages(pairs, c):
    ell, adv = map(np.array, zip(*pairs))
    assert group_covariance(ell, c * adv) == pytest.approx(
        c * group_covariance(ell, adv), rel=1e-9, abs=1e-9
    )
    assert group_covariance(ell, adv) == pytest.approx(group_covariance(adv, ell), abs=1e-12)


def test_binned_covariance():
    assert binned_covariance([GroupCovariance(0, 0.5, 0.3)]) == {0.5: 0.3}
    two = [GroupCovariance(0, 0.5, 0.2), GroupCovariance(3, 0.5, 0.4)]
    assert binned_covariance(two) == {0.5: pytest.approx(0.3)}
    late = two + [GroupCovariance(40, 0.5, 100.0), GroupCovariance(41, 0.25, 1.0)]
    assert binned_covariance(late, window_steps=40) == {0.5: pytest.approx(0.3)}


def test_binned_from_records_matches_group_list():
    rng = np.random.default_rng(0)
    G = 8
    groups, records = [], []
    for step in range(60):
        bins = {}
        for _ in range(5):
            k = int(rng.integers(1, G))
            cov = float(rng.normal())
            groups.append(GroupCovariance(step, k / G, cov))
            bins.setdefault(k, []).append(cov)
        records.append(
            MetricsRecord(step, 0.5, 1.0, 0.0, 0.0, None, {k: (np.mean(v), len(v)) for k, v in bins.items()})
        )
    a = binned_covariance(groups, 40)
    b = binned_covariance_from_records(records, G, 40)
    assert a.keys() == b.keys()
    for p in a:
        assert b[p] == pytest.approx(a[p], abs=1e-12)


def test_solved_proportions():
    assert solved_proportions([1, 0, 0.5, 1]) == (0.5, 0.25)
    assert solved_proportions([0.5] * 4) == (0.0, 0.0)
    assert solved_proportions([1.0] * 3) == (1.0, 0.0)


@given(st.lists(st.sampled_from([k / 8 for k in range(9)]), min_size=1, max_size=30))
def test_solved_fractions_partition(acc):
    all_, none = solved_proportions(acc)
    mixed = np.mean([0 < a < 1 for a in acc])
    assert all_ + none + mixed == pytest.approx(1.0)


def test_positive_logprob_increment():
    assert positive_logprob_increment([-3.0, -1.0], [-3.0, -1.0]) == 0.0
    assert positive_logprob_increment([-3.0], [-2.5]) == pytest.approx(0.5)
    assert positive_logprob_increment([-1.0, -1.0], [-0.8, -0.6]) == pytest.approx(0.3)
    assert positive_logprob_increment([], []) is None


def test_ema_examples():
    assert ema_smooth([2.0, 2.0, 2.0]) == [2.0, 2.0, 2.0]
    assert ema_smooth([0.0, 1.0], 0.7) == pytest.approx([0.0, 0.3])
    assert ema_smooth([1.0, 5.0, -2.0], 0.0) == [1.0, 5.0, -2.0]
    with pytest.raises(ValueError):
        ema_smooth([])
    with pytest.raises(ValueError):
        ema_smooth([1.0], 1.0)


@given(st.lists(floats, min_size=1, max_size=40), st.floats(0, 0.99))
def test_ema_incremental_equals_batch(xs, f):
    running, inc = None, []
    for x in xs:
        running = ema_update(running, x, f)
        inc.append(running)
    assert inc == ema_smooth(xs, f)


def _records():
    return [
        MetricsRecord(0, 0.25, 1.3, 0.0, 0.5, None, {1: (-0.12, 2), 4: (0.031, 1)}, 0.1, 0.25, 0.1),
        MetricsRecord(1, 1 / 3, 1.2, 0.125, 0.25, 0.01, {}, None, 0.2583333333333333, 0.1, 1e-17),
    ]


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip(tmp_path, fmt):
    path = tmp_path / f"m.{fmt}"
    write_metrics(_records(), path, fmt, group_size=8, header={"variant": "grpo"})
    _, back = read_metrics(path)
    assert back == _records()


def test_csv_header_and_columns(tmp_path):
    path = write_metrics([], tmp_path / "empty.csv", "csv", group_size=4, header={"variant": "x"})
    meta, recs = read_metrics(path)
    assert recs == []
    assert meta["variant"] == "x" and meta["ema_factor"] == 0.7
    lines = path.read_text().splitlines()
    cols = [l for l in lines if not l.startswith("#")]
    assert len(cols) == 1
    assert "cov_p_3of4" in cols[0] and "cov_p_4of4" not in cols[0]


def test_jsonl_line_count(tmp_path):
    path = write_metrics(_records(), tmp_path / "m.jsonl", "jsonl")
    assert len(path.read_text().splitlines()) == len(_records())


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_metrics([], tmp_path / "m.txt", "xml")
