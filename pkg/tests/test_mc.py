import math

import pytest

from hawkespop.errors import ZeroVariance
from hawkespop.mc import (EstimateResult, compare, estimate,
                          estimate_state_stats, ks_time_rescaling)


def test_compare_exact_match():
    est = EstimateResult(statistic="x", mean=2.0, std_error=0.1, n_paths=1000)
    rep = compare("x", 2.0, est)
    assert rep.z == 0.0 and rep.passed


def test_compare_ten_sigma_fails():
    est = EstimateResult(statistic="x", mean=3.0, std_error=0.1, n_paths=1000)
    rep = compare("x", 2.0, est)
    assert rep.z == pytest.approx(10.0)
    assert not rep.passed


def test_compare_zero_variance(model_poisson):
    res = estimate(model_poisson, "exp_theta_count", 1.0, 200, 1, theta=0.0)
    with pytest.raises(ZeroVariance):
        compare("unit", 1.0, res)


def test_seed_determinism(model_exp2):
    a = estimate(model_exp2, "N_T", 1.0, 500, 42)
    b = estimate(model_exp2, "N_T", 1.0, 500, 42)
    assert a == b
    rep_a = compare("E[N]", 1.367879, a)
    rep_b = compare("E[N]", 1.367879, b)
    assert rep_a == rep_b
    assert repr(rep_a) == repr(rep_b)


def test_poisson_mean_and_se(model_poisson):
    res = estimate(model_poisson, "N_T", 1.0, 2000, 7)
    assert abs(res.mean - 1.0) <= 4 * res.std_error
    # Poisson(1): variance 1, so the SE should be about 1/sqrt(n)
    assert res.std_error == pytest.approx(1.0 / math.sqrt(2000), rel=0.15)


def test_estimate_requires_min_paths(model_poisson):
    with pytest.raises(ValueError):
        estimate(model_poisson, "N_T", 1.0, 50, 1)


def test_estimate_unknown_statistic(model_poisson):
    with pytest.raises(ValueError):
        estimate(model_poisson, "nope", 1.0, 200, 1)


def test_coverage_sanity(model_poisson):
    # 50 independent replications of a true-null comparison at z_max = 4:
    # essentially all must pass
    passed = 0
    for rep in range(50):
        res = estimate(model_poisson, "N_T", 1.0, 400, 1000 + rep)
        passed += compare("E[N]", 1.0, res).passed
    assert passed / 50 >= 0.99


def test_report_row_format(model_exp2):
    res = estimate(model_exp2, "N_T", 1.0, 500, 3)
    row = compare("E[N_T]", 1.0 + math.exp(-1.0), res).row()
    assert row.startswith("E[N_T]: analytic=")
    assert "[pass]" in row or "[FAIL]" in row


def test_state_stats_consistent_with_each_other(model_exp2):
    specs = [{"name": "n", "stat": "N_T"}, {"name": "n2", "stat": "N_T2"},
             {"name": "lam", "stat": "lambda_T"},
             {"name": "L", "stat": "exp_theta_X", "theta": [-0.5, 0.0]}]
    out = estimate_state_stats(model_exp2, specs, 1.0, 2000, 11)
    # second moment must dominate squared mean
    assert out[1].mean >= out[0].mean ** 2
    assert out[2].mean >= model_exp2.mu
    assert 0.0 < out[3].mean < 1.0


def test_ks_time_rescaling_rejects_tiny(model_poisson):
    with pytest.raises(ValueError):
        ks_time_rescaling(model_poisson, 0.01, 2, 1)


def test_workers_do_not_change_results(model_exp2):
    a = estimate_state_stats(model_exp2, [{"name": "n", "stat": "N_T"}],
                             1.0, 5000, 21, workers=1)[0]
    b = estimate_state_stats(model_exp2, [{"name": "n", "stat": "N_T"}],
                             1.0, 5000, 21, workers=2)[0]
    assert a == b
