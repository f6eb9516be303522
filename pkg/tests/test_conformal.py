import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcp1.certificates import Norm, SmoothingSpec, ThreatModel
from rcp1.conformal import (CalibrationResult, PredictionSet, adjusted_level, calibrate_rcp1,
                            calibrate_vanilla, corrected_quantile, evaluate, evaluate_matrix,
                            membership_matrix, predict_set, predict_sets, quantile_rank)
from rcp1.errors import DomainError, ShapeError
from rcp1.scores import ScoreTable

ALPHA_PRIME = 0.037411194400060123625  # 1 - Phi(Phi^-1(0.9) + 0.5), mpmath


def table_from_true(true_scores, K=3):
    n = len(true_scores)
    values = np.zeros((n, K))
    values[:, 0] = true_scores
    return ScoreTable(values, np.zeros(n, dtype=int))


# ---------------------------------------------------------------------------
# quantile


def test_corrected_quantile_example():  # [DERIVED]
    scores = [0.1 * k for k in range(1, 11)]
    assert corrected_quantile(scores, 0.2) == pytest.approx(0.2)


def test_single_score():  # [TRIVIAL]
    for a in (0.01, 0.5, 0.99):
        assert corrected_quantile([0.42], a) == 0.42


def test_all_equal():  # [TRIVIAL]
    assert corrected_quantile([0.3] * 17, 0.1) == 0.3


def test_quantile_errors():
    with pytest.raises(DomainError):
        corrected_quantile([], 0.1)
    with pytest.raises(DomainError):
        corrected_quantile([0.1], 1.0)
    with pytest.raises(DomainError):
        corrected_quantile([0.1, math.nan], 0.5)


@given(st.integers(1, 5000), st.floats(0.001, 0.999))
def test_rank_keeps_marginal_guarantee(n, alpha):
    # P(S_test >= S_(k)) = 1 - k/(n+1) for continuous exchangeable scores
    k = quantile_rank(n, alpha)
    assert 0 <= k <= n
    assert 1 - k / (n + 1) >= 1 - alpha - 1e-12
    assert k <= max(1, math.ceil(alpha * (1 - 1 / (n + 1)) * n))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.floats(0.01, 0.99),
       st.randoms(use_true_random=False))
def test_quantile_order_free(scores, alpha, rnd):
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    assert corrected_quantile(scores, alpha) == corrected_quantile(shuffled, alpha)
    assert corrected_quantile(scores, alpha) in scores


# ---------------------------------------------------------------------------
# calibration


def test_vanilla_example():  # [DERIVED]
    true = [0.9 - 0.01 * i for i in range(50)]
    c = calibrate_vanilla(table_from_true(true), 0.1)
    assert c.threshold_q == corrected_quantile(true, 0.1)
    assert c.adjusted_level == c.nominal_level == 0.9
    assert not c.vacuous


def test_vanilla_alpha_near_one():  # [TRIVIAL]
    true = np.random.default_rng(0).uniform(size=10)
    assert calibrate_vanilla(table_from_true(true), 0.999).threshold_q == true.max()


def test_vanilla_alpha_near_zero_falls_back_to_full_sets():
    true = np.random.default_rng(0).uniform(size=10)
    # the quantile itself clamps to the minimum ...
    assert corrected_quantile(true, 0.01) == true.min()
    # ... but no finite threshold reaches 99% with 10 points, so calibration
    # admits every label
    c = calibrate_vanilla(table_from_true(true), 0.01)
    assert c.vacuous and c.threshold_q == -math.inf
    assert predict_set([-5.0, -6.0, -7.0], c).members == {0, 1, 2}


def test_rcp1_zero_radius_matches_vanilla():  # [TRIVIAL]
    t = table_from_true(np.random.default_rng(1).normal(size=80))
    c0 = calibrate_rcp1(t, 0.1, SmoothingSpec.gaussian(0.5), ThreatModel(Norm.L2, 0.0))
    cv = calibrate_vanilla(t, 0.1)
    assert c0.threshold_q == cv.threshold_q
    assert c0.adjusted_level == cv.adjusted_level


def test_adjusted_alpha_example():  # [DERIVED]
    lvl = adjusted_level(0.1, SmoothingSpec.gaussian(0.5), ThreatModel(Norm.L2, 0.25))
    assert 1 - lvl == pytest.approx(ALPHA_PRIME, abs=1e-12)


def test_rcp1_uses_adjusted_level():
    t = table_from_true(np.random.default_rng(2).normal(size=500))
    c = calibrate_rcp1(t, 0.1, SmoothingSpec.gaussian(0.5), ThreatModel(Norm.L2, 0.25))
    assert c.threshold_q == corrected_quantile(t.true_scores(), 1 - c.adjusted_level)
    assert c.adjusted_level >= c.nominal_level
    assert c.adjusted_alpha == pytest.approx(ALPHA_PRIME, abs=1e-12)


def test_rcp1_saturates_at_large_radius():  # [PAPER]
    t = table_from_true(np.random.default_rng(3).normal(size=200), K=10)
    c = calibrate_rcp1(t, 0.1, SmoothingSpec.gaussian(0.25), ThreatModel(Norm.L2, 0.75))
    assert c.adjusted_level >= 1 - 1e-4
    assert c.vacuous
    assert all(len(s) == 10 for s in predict_sets(t, c))


def test_rcp1_laplace_and_uniform_run():
    t = table_from_true(np.random.default_rng(4).normal(size=300))
    for s in (SmoothingSpec.laplace(0.5), SmoothingSpec.uniform(0.5)):
        c = calibrate_rcp1(t, 0.1, s, ThreatModel(Norm.L1, 0.05))
        assert c.adjusted_level > 0.9 and not c.vacuous
    # uniform: 0.9 + r/(2a) reaches 1
    c = calibrate_rcp1(t, 0.1, SmoothingSpec.uniform(0.5), ThreatModel(Norm.L1, 0.1))
    assert c.adjusted_level == 1.0 and c.vacuous


def test_nested_across_radius():
    rng = np.random.default_rng(5)
    cal = ScoreTable(rng.normal(size=(200, 6)), rng.integers(0, 6, 200))
    test = ScoreTable(rng.normal(size=(100, 6)))
    s = SmoothingSpec.gaussian(0.25)
    prev = None
    for r in (0.0, 0.06, 0.12, 0.18, 0.25, 0.37, 0.5):
        m = membership_matrix(test, calibrate_rcp1(cal, 0.1, s, ThreatModel(Norm.L2, r)))
        if prev is not None:
            assert np.all(m >= prev)
        prev = m


# ---------------------------------------------------------------------------
# prediction and evaluation


def calib(q, vacuous=False):
    return CalibrationResult(q, 0.9, 0.9, 10, vacuous=vacuous)


def test_predict_boundary_included():  # [TRIVIAL]
    assert predict_set([0.4, 0.5, 0.6], calib(0.5)).members == {1, 2}


def test_predict_vacuous_full():  # [TRIVIAL]
    assert predict_set([0.4, 0.5, 0.6], calib(-math.inf, True)).members == {0, 1, 2}


def test_predict_empty_set_allowed():  # [TRIVIAL]
    assert predict_set([0.4, 0.5, 0.6], calib(0.7)).members == frozenset()


def test_predict_shape_mismatch():
    with pytest.raises(ShapeError):
        predict_set([0.1, 0.2], calib(0.5), n_labels=3)


def test_membership_matrix_matches_sets():
    t = ScoreTable(np.random.default_rng(6).uniform(size=(30, 4)))
    c = calib(0.5)
    m = membership_matrix(t, c)
    assert [set(np.flatnonzero(r)) for r in m] == [set(s.members) for s in predict_sets(t, c)]


def test_evaluate_full_sets():  # [TRIVIAL]
    sets = [PredictionSet(frozenset(range(4)), i) for i in range(3)]
    m = evaluate(sets, [0, 3, 2], [1, 4])
    assert m["coverage"] == 1.0 and m["mean_size"] == 4
    assert m["prop_le_1"] == 0.0 and math.isnan(m["cov_le_1"])
    assert m["prop_le_4"] == 1.0


def test_evaluate_empty_sets():  # [TRIVIAL]
    sets = [PredictionSet(frozenset(), i) for i in range(3)]
    assert evaluate(sets, [0, 1, 2], [1])["coverage"] == 0.0


def test_evaluate_hand_count():  # [DERIVED]
    sets = [PredictionSet(frozenset({0}), 0), PredictionSet(frozenset({1}), 1)]
    m = evaluate(sets, [0, 0], [1])
    assert m == {"coverage": 0.5, "mean_size": 1.0, "prop_le_1": 1.0, "cov_le_1": 0.5}


def test_evaluate_misaligned():
    with pytest.raises(ShapeError):
        evaluate([PredictionSet(frozenset(), 0)], [0, 1], [1])


def test_evaluate_matrix_agrees():
    rng = np.random.default_rng(7)
    t = ScoreTable(rng.uniform(size=(40, 5)), rng.integers(0, 5, 40))
    c = calib(0.4)
    assert evaluate(predict_sets(t, c), t.labels) == evaluate_matrix(
        membership_matrix(t, c), t.labels)


# ---------------------------------------------------------------------------
# coverage on exchangeable data


def test_vanilla_marginal_coverage():
    rng = np.random.default_rng(8)
    n, n_test, alpha, trials = 100, 50, 0.1, 2000
    cover = np.empty(trials)
    for t in range(trials):
        cal = rng.normal(size=n)
        test = rng.normal(size=n_test)
        q = corrected_quantile(cal, alpha)
        cover[t] = np.mean(test >= q)
    # Beta((1-a)(n+1), a(n+1)) standard deviation of conditional coverage
    a, b = (1 - alpha) * (n + 1), alpha * (n + 1)
    beta_sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    se = math.hypot(beta_sd, math.sqrt(alpha * (1 - alpha) / n_test)) / math.sqrt(trials)
    assert cover.mean() >= 1 - alpha - 3 * se


def test_rcp1_clean_coverage_at_adjusted_level():
    rng = np.random.default_rng(9)
    s, thr = SmoothingSpec.gaussian(0.5), ThreatModel(Norm.L2, 0.25)
    cover = []
    for _ in range(1000):
        cal = table_from_true(rng.normal(size=200))
        c = calibrate_rcp1(cal, 0.1, s, thr)
        cover.append(np.mean(rng.normal(size=100) >= c.threshold_q))
    cover = np.array(cover)
    assert cover.mean() >= c.adjusted_level - 3 * cover.std(ddof=1) / math.sqrt(cover.size)
