import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hhcircuit.errors import DomainError
from hhcircuit.neuron import SpikeTrain
from hhcircuit.regimes import (QuietBranch, QuietConfig, calibrate_quantiles, classify_quiet,
                               classify_regular, delta_df, delta_lt, output_benchmarks,
                               poisson_cdf, poisson_laplace, poisson_upper_quantile)


def pois_cdf_ref(lam, v):
    # term recursion, written independently of scipy
    term, total = math.exp(-lam), 0.0
    for k in range(int(math.floor(v)) + 1):
        total += term
        term *= lam / (k + 1)
    return total


def riemann_df(xi, mean, i_end=5.5, h=1e-4):
    xi = np.asarray(xi)
    grid = np.arange(0.0, i_end, h) + h / 2
    emp = np.array([np.mean(xi <= v) for v in np.arange(0, math.floor(i_end) + 1)])
    ref = np.array([pois_cdf_ref(mean, v) for v in np.arange(0, math.floor(i_end) + 1)])
    idx = np.floor(grid).astype(int)
    return float(np.sum(np.abs(emp[idx] - ref[idx])) * h)


def riemann_lt(xi, mean, i_end=5.5, h=1e-4):
    grid = np.arange(0.0, i_end, h) + h / 2
    emp = np.exp(-np.outer(grid, np.asarray(xi, float))).mean(axis=1)
    ref = np.exp(-mean * (1 - np.exp(-grid)))
    return float(np.sum(np.abs(emp - ref)) * h)


def test_poisson_cdf_at_zero():
    assert poisson_cdf(2.3, 0) == pytest.approx(math.exp(-2.3))
    assert poisson_cdf(0.0, 0) == 1.0


@pytest.mark.parametrize("lam", [0.125, 1.0, 12.5, 40.0])
@pytest.mark.parametrize("v", [0, 1.5, 3, 19, 30.2])
def test_poisson_cdf_matches_recursion(lam, v):
    assert poisson_cdf(lam, v) == pytest.approx(pois_cdf_ref(lam, v), rel=1e-12, abs=1e-300)


def test_poisson_cdf_around_quantile():
    assert poisson_cdf(12.5, 19) >= 0.95 > poisson_cdf(12.5, 18)


def test_poisson_laplace():
    assert poisson_laplace(3.0, 0.0) == 1.0
    assert poisson_laplace(2.0, 1.0) == pytest.approx(math.exp(-2 * (1 - math.exp(-1))))
    with pytest.raises(DomainError):
        poisson_laplace(1.0, -1.0)
    with pytest.raises(DomainError):
        poisson_cdf(-1.0, 1.0)


def test_upper_quantile_examples():
    assert poisson_upper_quantile(0.05, 12.5) == 19
    assert poisson_upper_quantile(1.0, 7.0) == 0
    assert poisson_upper_quantile(0.3, 0.0) == 0


def test_upper_quantile_monotone():
    alphas = [0.001, 0.01, 0.05, 0.2, 0.5, 0.9]
    lams = [0.1, 1.0, 5.0, 12.5, 30.0]
    q = np.array([[poisson_upper_quantile(a, l) for a in alphas] for l in lams])
    assert np.all(np.diff(q, axis=1) <= 0)
    assert np.all(np.diff(q, axis=0) >= 0)


def test_fit_statistics_degenerate():
    assert delta_df([0] * 10, 0.0) == 0.0
    assert delta_lt([0] * 10, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_delta_df_small_example_against_riemann():
    exact = delta_df([1, 0], 0.5)
    assert exact == pytest.approx(riemann_df([1, 0], 0.5), abs=1e-3)
    # hand value: |0.5 - e^-0.5| on [0,1), |1 - 1.5 e^-0.5| on [1,2), and the Poisson tail after
    hand = abs(0.5 - math.exp(-0.5)) + sum(1 - pois_cdf_ref(0.5, j) for j in range(1, 5)) \
        + 0.5 * (1 - pois_cdf_ref(0.5, 5))
    assert exact == pytest.approx(hand, abs=1e-14)


def test_delta_df_against_riemann_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        k = int(rng.integers(1, 60))
        xi = rng.poisson(rng.uniform(0.05, 3.0), size=k)
        mean = float(xi.mean())
        assert delta_df(xi, mean) == pytest.approx(riemann_df(xi, mean), abs=1e-3)


def test_delta_lt_against_riemann():
    rng = np.random.default_rng(8)
    for _ in range(20):
        xi = rng.poisson(0.4, size=50)
        assert delta_lt(xi, xi.mean()) == pytest.approx(riemann_lt(xi, xi.mean()), abs=1e-6)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.randoms())
@settings(max_examples=40, deadline=None)
def test_statistics_permutation_invariant(xi, rnd):
    ys = list(xi)
    rnd.shuffle(ys)
    m = float(np.mean(xi))
    assert delta_df(xi, m) == delta_df(ys, m)
    assert delta_lt(xi, m) == pytest.approx(delta_lt(ys, m), abs=1e-12)


def test_calibration_zero_intensity():
    cal = calibrate_quantiles(lambda_c=0.0, replications=200)
    assert cal.c_df == 0.0 and cal.c_lt == pytest.approx(0.0, abs=1e-12)


def test_calibration_reproducible_and_cached(tmp_path):
    path = tmp_path / "cal.json"
    a = calibrate_quantiles(replications=3000, seed=5, cache_path=str(path))
    b = calibrate_quantiles(replications=3000, seed=5)
    assert a == b
    stored = json.loads(path.read_text())
    assert set(stored) == {"lambda_c", "t0", "k", "i_end", "alpha_c", "replications", "seed",
                           "c_df", "c_lt"}
    stored["c_df"] = 123.0
    path.write_text(json.dumps(stored))
    assert calibrate_quantiles(replications=3000, seed=5, cache_path=str(path)).c_df == 123.0
    # a different key ignores the cache
    assert calibrate_quantiles(replications=3000, seed=6, cache_path=str(path)).c_df != 123.0


def test_calibration_stable_under_doubling():
    a = calibrate_quantiles(replications=20_000, seed=11)
    b = calibrate_quantiles(replications=40_000, seed=11)
    assert b.c_df == pytest.approx(a.c_df, rel=0.05)
    assert b.c_lt == pytest.approx(a.c_lt, rel=0.05)


def test_quiet_empty_train():
    v = classify_quiet(SpikeTrain(np.empty(0), 25_000.0))
    assert v.branch is QuietBranch.EXTREMELY_RARE and v.quiet
    assert v.n_t1 == 0 and v.lambda_tilde == 0.0


def test_quiet_periodic_train_fails_count():
    t = 1000.0 * np.arange(1, 26) - 500.0
    v = classify_quiet(SpikeTrain(t, 25_000.0))
    assert v.branch is QuietBranch.FAIL
    assert v.n_t1 == 25 and v.quantile_bound == 19 and not v.count_ok


def test_quiet_poisson_like_train_passes():
    rng = np.random.default_rng(3)
    t = np.sort(rng.uniform(0, 25_000.0, 6))
    v = classify_quiet(SpikeTrain(t, 25_000.0))
    assert v.branch is QuietBranch.POISSON_FIT
    assert v.count_ok and v.df_ok and v.lt_ok


def test_quiet_clustered_train_fails_fit():
    # 15 spikes packed into one segment are far from Poisson
    t = 100.0 + 10.0 * np.arange(15)
    v = classify_quiet(SpikeTrain(t, 25_000.0))
    assert v.count_ok and not v.df_ok
    assert v.branch is QuietBranch.FAIL


def test_quiet_verdict_flags_recomputable():
    rng = np.random.default_rng(4)
    cfg = QuietConfig()
    for n in (3, 10, 18, 30):
        t = np.sort(rng.uniform(0, 25_000.0, n))
        v = classify_quiet(SpikeTrain(t, 25_000.0), cfg)
        assert v.count_ok == (v.n_t1 <= v.quantile_bound)
        assert v.df_ok == (v.delta_df <= cfg.c_df)
        assert v.lt_ok == (v.delta_lt <= cfg.c_lt)
        assert v.extremely_rare == (v.n_t1 <= 2 and v.lambda_tilde <= 1e-4)
        assert sum(v.counts) == v.n_t1
        assert v == classify_quiet(SpikeTrain(t, 25_000.0), cfg)


def test_quiet_horizon_too_short():
    with pytest.raises(DomainError):
        classify_quiet(SpikeTrain(np.empty(0), 1000.0))


def test_regular_periodic():
    t = 14.3 * np.arange(1, 35)
    v = classify_regular(SpikeTrain(t, 500.0), 500.0)
    assert v.n_t1 == 34
    assert v.coverage == pytest.approx(34 * 14.3 / 500)
    assert max(v.r05, v.r10, v.r25) < 1e-12
    assert v.regular


def test_regular_insufficient_data_is_a_fail():
    v = classify_regular(SpikeTrain(np.array([3.0]), 500.0), 500.0)
    assert not v.regular and math.isnan(v.median)
    v = classify_regular(SpikeTrain(14.3 * np.arange(1, 15), 500.0), 500.0)
    assert not v.count_ok and not v.regular


def test_regular_noisy_spacing():
    rng = np.random.default_rng(0)
    t = np.cumsum(rng.uniform(13.9, 14.9, 34))
    v = classify_regular(SpikeTrain(t[t <= 500], 500.0), 500.0)
    assert v.r25 < 0.1 and v.regular
    assert v.median == pytest.approx(14.4, abs=0.3)


def test_regular_irregular_train():
    rng = np.random.default_rng(1)
    t = np.cumsum(rng.exponential(14.0, 40))
    v = classify_regular(SpikeTrain(t[t <= 500], 500.0), 500.0)
    assert not v.regular


def test_benchmarks():
    u2, u1 = output_benchmarks(14.4, 0.02)
    assert (round(u2, 3), round(u1, 3)) == (3.996, 2.996)
    # closed form at a median of 14.3
    assert output_benchmarks(14.3, 0.02)[1] == pytest.approx(3.0203, abs=1e-4)
    with pytest.raises(DomainError):
        output_benchmarks(0.0, 0.02)


@given(st.floats(0.01, 100), st.floats(0.001, 1))
def test_benchmark_difference(delta, c1):
    u2, u1 = output_benchmarks(delta, c1)
    assert u2 - u1 == 1.0
