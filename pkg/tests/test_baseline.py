import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fredo.baseline import AverageTileConfig, average_tile, average_tile_batch, search_r
from fredo.dataio import TimeSeriesMatrix
from fredo.errors import LengthMismatch, NoFeasibleCandidate
from oracles import average_tile_brute


def test_hand_example():
    out = average_tile([1.0, 2.0, 3.0, 4.0], AverageTileConfig(2, 2), 3)
    assert average_tile_brute([1.0, 2.0, 3.0, 4.0], 2, 2, 3) == [2.0, 3.0, 2.0]
    np.testing.assert_array_equal(out, [2.0, 3.0, 2.0])


def test_period_one_is_mean():
    np.testing.assert_array_equal(average_tile([1.0, 2.0, 3.0, 4.0], AverageTileConfig(1, 4), 2), [2.5, 2.5])


def test_periodic_input_is_fixed_point(rng):
    cycle = rng.normal(size=6)
    x = np.tile(cycle, 3)
    # (c + c + c) / 3 can be one ulp off c
    np.testing.assert_allclose(average_tile(x, AverageTileConfig(6, 3), 14), cycle[np.arange(14) % 6], rtol=1e-15, atol=1e-15)


def test_r_one_repeats_last_cycle(rng):
    x = rng.normal(size=5)
    np.testing.assert_array_equal(average_tile(x, AverageTileConfig(5, 1), 12), x[np.arange(12) % 5])


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        average_tile(np.zeros(7), AverageTileConfig(3, 2), 4)


def test_config_validation():
    with pytest.raises(ValueError):
        AverageTileConfig(0, 1)
    with pytest.raises(ValueError):
        AverageTileConfig(2, 0)


@given(st.integers(1, 12), st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_matches_brute_force(period, r, output_len, seed):
    x = np.random.default_rng(seed).normal(size=period * r)
    out = average_tile(x, AverageTileConfig(period, r), output_len)
    assert out.tolist() == average_tile_brute(x.tolist(), period, r, output_len)


@given(st.integers(1, 12), st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_tiling_periodicity(period, r, output_len, seed):
    out = average_tile(np.random.default_rng(seed).normal(size=period * r), AverageTileConfig(period, r), output_len)
    assert np.array_equal(out[period:], out[:-period] if period < output_len else out[:0])


@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1), st.integers(-20, 20))
def test_scale_equivariance_power_of_two(period, r, seed, exponent):
    cfg = AverageTileConfig(period, r)
    x = np.random.default_rng(seed).normal(size=period * r)
    a = 2.0**exponent
    assert np.array_equal(average_tile(a * x, cfg, 10), a * average_tile(x, cfg, 10))


@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_affine_equivariance_general(period, r, seed, a, c):
    cfg = AverageTileConfig(period, r)
    x = np.random.default_rng(seed).normal(size=period * r)
    np.testing.assert_allclose(average_tile(a * x + c, cfg, 10), a * average_tile(x, cfg, 10) + c, rtol=1e-12, atol=1e-9)


@given(st.integers(1, 8), st.sampled_from([1, 2, 4, 8]), st.integers(0, 2**32 - 1), st.integers(-1000, 1000))
def test_shift_equivariance_exact_on_integers(period, r, seed, c):
    cfg = AverageTileConfig(period, r)
    x = np.random.default_rng(seed).integers(-1000, 1000, size=period * r).astype(float)
    assert np.array_equal(average_tile(x + c, cfg, 9), average_tile(x, cfg, 9) + c)


def test_batch_matches_single(rng):
    cfg = AverageTileConfig(4, 3)
    xs = rng.normal(size=(7, 12))
    batch = average_tile_batch(xs, cfg, 9)
    for row, x in zip(batch, xs):
        np.testing.assert_array_equal(row, average_tile(x, cfg, 9))


class TestSearchR:
    def test_noise_free_prefers_smallest(self):
        cycle = np.array([0.0, 1.0, 3.0, -2.0])
        m = TimeSeriesMatrix(np.tile(cycle, 40))
        res = search_r(m, 4, [3, 1, 2], output_len=4, val_len=60)
        assert res.best_r == 1
        assert set(res.table) == {1, 2, 3}
        assert all(v == 0.0 for v in res.table.values())

    def test_noise_favours_more_cycles(self):
        period, sigma2 = 8, 1.0
        cycle = np.sin(2 * np.pi * np.arange(period) / period)
        tables = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = np.tile(cycle, 40) + rng.normal(0, np.sqrt(sigma2), size=40 * period)
            tables.append(search_r(TimeSeriesMatrix(x), period, [1, 2, 3, 4], output_len=8, val_len=120).table)
        means = {r: np.mean([t[r] for t in tables]) for r in (1, 2, 3, 4)}
        assert means[1] > means[2] > means[3] > means[4]
        # expected validation MSE for i.i.d. noise is sigma2 * (1 + 1/r)
        for r, value in means.items():
            assert value == pytest.approx(sigma2 * (1 + 1 / r), rel=0.05)

    def test_no_feasible_candidate(self):
        m = TimeSeriesMatrix(np.arange(100, dtype=float))
        with pytest.raises(NoFeasibleCandidate):
            search_r(m, 10, [2, 3], output_len=10, val_len=20)

    def test_input_cap_skips(self):
        m = TimeSeriesMatrix(np.sin(np.arange(300) / 3.0))
        res = search_r(m, 5, [1, 2, 3], output_len=5, val_len=100, input_cap=10)
        assert res.skipped == (3,)
        assert set(res.table) == {1, 2}
