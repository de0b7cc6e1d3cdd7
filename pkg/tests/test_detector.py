import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from graphdrift.detector import (DetectorState, ThresholdTable, calibrate_thresholds, chi_sampler,
                                 cusum_step, default_offset, fit_baseline,
                                 first_threshold_closed_form, run_cusum, run_detector,
                                 simulate_thresholds, window_statistic, window_statistics)
from graphdrift.errors import (DegeneratePrototypesError, InsufficientSimulationsError,
                               InvalidInputError)
from oracles import cusum_by_hand, eigen_sqrt_quantile_chi2


def test_fit_baseline_two_points():
    m = fit_baseline(np.array([[0, 0], [2, 2], [0, 2], [2, 0]], float), 1)
    assert np.allclose(m.mean0, [1, 1])
    assert m.scale == pytest.approx(1 / 4 + 1)


def test_fit_baseline_identical_vectors_is_degenerate():
    with pytest.raises(DegeneratePrototypesError):
        fit_baseline(np.ones((10, 3)), 5)


def test_fit_baseline_preconditions():
    with pytest.raises(InvalidInputError):
        fit_baseline(np.zeros((4, 3)), 5)
    with pytest.raises(InvalidInputError):
        fit_baseline(np.random.default_rng(0).normal(size=(10, 2)), 0)


def test_fit_baseline_recovers_identity_covariance():
    Y = np.random.default_rng(0).standard_normal((10_000, 4))
    m = fit_baseline(Y, 5)
    assert np.abs(m.cov - np.eye(4)).max() < 0.05
    assert np.allclose(m.sigma_inverse, m.sigma_inverse.T)
    assert np.all(np.linalg.eigvalsh(m.sigma_inverse) > 0)


def test_fit_baseline_shrinks_near_singular_covariance():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(50, 1))
    Y = np.hstack([a, a + 1e-9 * rng.normal(size=(50, 1)), rng.normal(size=(50, 1))])
    m = fit_baseline(Y, 5)
    assert m.shrunk


def _model_with_sigma(sigma, mean0):
    from graphdrift.detector import BaselineModel
    sigma = np.asarray(sigma, float)
    return BaselineModel(np.asarray(mean0, float), sigma, 1.0, np.linalg.inv(sigma))


def test_window_statistic_hand_examples():
    m = _model_with_sigma(np.diag([4.0, 1.0]), [0, 0])
    assert window_statistic(m, [[2, 3]]) == pytest.approx(np.sqrt(10))
    assert window_statistic(m, [[0, 0], [0, 0]]) == 0
    eye = _model_with_sigma(np.eye(3), [1, 2, 3])
    assert window_statistic(eye, [[0, 0, 0]]) == pytest.approx(np.sqrt(14))
    with pytest.raises(InvalidInputError):
        window_statistic(m, [[1, 2, 3]])


@given(st.integers(0, 10**6))
def test_window_statistic_affine_invariance(seed):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(40, 3))
    W = rng.normal(size=(5, 3)) + 0.3
    A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    b = rng.normal(size=3)
    s1 = window_statistic(fit_baseline(T, 5), W)
    s2 = window_statistic(fit_baseline(T @ A.T + b, 5), W @ A.T + b)
    assert s1 == pytest.approx(s2, rel=1e-6, abs=1e-6)


def test_window_statistics_drops_remainder():
    m = _model_with_sigma(np.eye(2), [0, 0])
    s = window_statistics(m, np.ones((11, 2)), 5)
    assert s.shape == (2,) and np.allclose(s, np.sqrt(2))


def test_cusum_step_hand_trace():
    q = 1.0
    st_ = DetectorState(q=q)
    st_, a = cusum_step(st_, q, 1.0)
    assert st_.S == 0 and not a
    st_, a = cusum_step(st_, q + 2, 3.0)
    assert st_.S == 2 and not a and st_.w == 2
    st_, a = cusum_step(st_, q + 2, 3.0)
    assert a and st_.S == 0 and st_.w == 0 and st_.alarms == (3,)


def test_cusum_telescopes():
    st_ = DetectorState(q=0.5)
    for w in range(1, 20):
        st_, a = cusum_step(st_, 1.5, 1e9)
        assert st_.S == pytest.approx(w) and not a


@given(st.lists(st.floats(0, 5), min_size=1, max_size=60), st.floats(0, 2))
def test_run_cusum_matches_plain_loop(s, q):
    h = np.linspace(1, 3, 10)
    table = ThresholdTable(0.01, 10, h, 10_000)
    trace = run_cusum(np.array(s), table, q)
    S_ref, alarms_ref = cusum_by_hand(s, q, h)
    assert trace.alarms == alarms_ref
    assert np.allclose(trace.S, S_ref)
    assert np.all(trace.S >= 0)


@pytest.mark.parametrize("M,expected", [(1, 1.1503), (4, 2.3206), (2, np.sqrt(2 * np.log(4)))])
def test_default_offset(M, expected):
    assert default_offset(M) == pytest.approx(expected, abs=1e-4)
    assert default_offset(M) == pytest.approx(eigen_sqrt_quantile_chi2(0.75, M), abs=1e-9)


def test_first_threshold_closed_form():
    assert first_threshold_closed_form(4, 200) == pytest.approx(
        eigen_sqrt_quantile_chi2(0.995, 4) - default_offset(4), abs=1e-9)
    assert first_threshold_closed_form(4, 200) == pytest.approx(1.534, abs=1e-3)


def test_calibration_table_basic(table_m4):
    assert table_m4.horizon == 4000 and table_m4.alpha == 1 / 200
    assert np.all(np.isfinite(table_m4.h)) and np.all(table_m4.h >= 0)
    assert table_m4.h[0] == pytest.approx(first_threshold_closed_form(4, 200), rel=0.02)
    assert table_m4.threshold(10**6) == table_m4.h[-1]
    assert ThresholdTable.from_json(table_m4.to_json()).h.tolist() == table_m4.h.tolist()


def test_calibration_monotone_in_arl0():
    hs = [calibrate_thresholds(4, a, 40_000, horizon=30, seed=1).h for a in (50, 100, 200)]
    assert np.all(hs[0] <= hs[1] + 1e-3) and np.all(hs[1] <= hs[2] + 1e-3)


def test_calibration_independent_of_thread_count():
    a = calibrate_thresholds(3, 50, 150_000, horizon=20, seed=4, threads=1)
    b = calibrate_thresholds(3, 50, 150_000, horizon=20, seed=4, threads=3)
    assert np.array_equal(a.h, b.h)


def test_calibration_errors():
    with pytest.raises(InvalidInputError):
        calibrate_thresholds(4, 200, 1000)
    with pytest.raises(InsufficientSimulationsError):
        calibrate_thresholds(4, 2000, 100_000, horizon=5)


@pytest.mark.slow
def test_calibration_converges_in_num_sims():
    small = calibrate_thresholds(4, 200, 100_000, horizon=50, seed=1).h
    big = calibrate_thresholds(4, 200, 1_000_000, horizon=50, seed=2).h
    assert np.all(np.abs(small - big) / big < 0.02)


def test_conditional_alarm_rate_matches_alpha(table_m4):
    # fresh trajectories, never restarted: hazard at w given survival
    rng = np.random.default_rng(99)
    q = table_m4.q
    S = np.zeros(100_000)
    alive = np.ones(S.size, bool)
    for w in range(50):
        S = np.maximum(0, S + np.sqrt(rng.chisquare(4, S.size)) - q)
        fire = alive & (S > table_m4.h[w])
        rate = fire.sum() / alive.sum()
        assert abs(rate - 1 / 200) <= 0.3 / 200 + 3 * np.sqrt((1 / 200) / alive.sum())
        alive &= ~fire


def test_run_detector_zero_statistic_never_alarms(table_m4):
    m = _model_with_sigma(np.eye(4), np.zeros(4))
    assert run_detector(np.zeros((500, 4)), m, table_m4, 5) == []


def test_run_detector_large_shift(table_m4):
    rng = np.random.default_rng(5)
    n = 5
    m = fit_baseline(rng.standard_normal((300, 4)), n)
    hits = 0
    for r in range(100):
        Y = rng.standard_normal((100 * n, 4))
        Y[50 * n:] += 5
        alarms = run_detector(Y, m, table_m4, n)
        post = [a for a in alarms if a > 50]
        hits += bool(post) and post[0] <= 53
    assert hits >= 95


@pytest.mark.slow
def test_run_detector_mean_gap_matches_arl0(table_m4):
    rng = np.random.default_rng(6)
    n = 5
    gaps = []
    for r in range(100):
        m = fit_baseline(rng.standard_normal((20_000, 4)), n)
        alarms = run_detector(rng.standard_normal((10_000 * n, 4)), m, table_m4, n)
        gaps += list(np.diff([0] + alarms))
    assert abs(np.mean(gaps) - 200) <= 40
