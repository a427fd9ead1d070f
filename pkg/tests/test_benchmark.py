import numpy as np
import pytest

from curvkit import InvalidInputError
from curvkit.benchmark import (
    ceil_pow23,
    compare_methods,
    convergence_experiment,
    count_inversions,
    fit_loglog_slope,
    holdout_curve,
    holdout_evaluation,
    holdout_reference,
    matrix_mse,
    parse_k_rule,
    scalar_mse,
    trial_seed,
)
from curvkit.surfaces import Sphere, Torus, sample_surface
from curvkit.wme import estimate_field


def test_loglog_slope_recovers_power_law():
    pts = [(n, 3.0 * n ** -0.7) for n in (100, 200, 400, 800)]
    slope, intercept = fit_loglog_slope(pts)
    assert slope == pytest.approx(-0.7)
    assert intercept == pytest.approx(np.log(3.0))
    ref = np.polyfit(np.log([1, 2, 5]), np.log([4.0, 3.0, 1.0]), 1)
    assert fit_loglog_slope([(1, 4.0), (2, 3.0), (5, 1.0)])[0] == pytest.approx(ref[0])
    with pytest.raises(InvalidInputError):
        fit_loglog_slope([(10, 0.0), (20, 1.0)])


def test_ceil_pow23():
    for n in list(range(1, 3000)) + [16000, 20000, 10**6, 10**9]:
        k = ceil_pow23(n)
        assert k**3 >= n * n > (k - 1) ** 3
    assert ceil_pow23(1000) == 100
    assert ceil_pow23(16000) == 635


def test_k_rules():
    assert parse_k_rule("pow23")(1001) == 101
    assert parse_k_rule("auto")(1001) == 100
    assert parse_k_rule("fixed:40")(20) == 19
    assert parse_k_rule(7)(100) == 7
    with pytest.raises(InvalidInputError):
        parse_k_rule("sqrt")


def test_trial_seed_distinct_and_stable():
    seeds = {trial_seed(0, n, t) for n in (1000, 2000) for t in range(3)}
    assert len(seeds) == 6
    assert trial_seed(0, 1000, 0) == trial_seed(0, 1000, 0)


def test_matrix_mse_zero_on_exact_sphere():
    s = sample_surface(Sphere(), 500, seed=0)
    f = estimate_field(s.cloud, 15)
    assert matrix_mse(s, f) < 1e-20
    assert matrix_mse(s, [f.estimate(i) for i in range(500)]) < 1e-20
    assert scalar_mse(s.true_K, f.K) < 1e-20


def test_matrix_mse_oracle():
    s = sample_surface(Sphere(), 10, seed=0)
    f = estimate_field(s.cloud, 5)
    f.G = s.shape_operators(f.frames) + np.array([[0.1, 0.0], [0.0, -0.2]])
    assert matrix_mse(s, f) == pytest.approx(0.05)


def test_convergence_small_run_is_deterministic():
    a = convergence_experiment(Torus(), [500, 1000], "pow23", trials=2, seed=1)
    b = convergence_experiment(Torus(), [500, 1000], "pow23", trials=2, seed=1)
    assert a.slope == b.slope
    assert len(a.rows) == 2 and len(a.trials) == 4
    assert a.rows[0].k == ceil_pow23(500)
    assert a.rows[1].mse_matrix < a.rows[0].mse_matrix
    assert a.rows[0].mse_matrix == pytest.approx(np.mean([r.mse_matrix for r in a.trials[:2]]))


def test_compare_methods_pairs():
    pairs = compare_methods(Torus(), [2000], k=50, sigma2_list=(0.0, 1e-4), trials=2)
    assert len(pairs) == 4
    for w, q in pairs:
        assert (w.method, q.method) == ("wme", "quad")
        assert w.n == q.n and w.sigma2 == q.sigma2 and w.trial == q.trial
    assert np.isfinite(pairs[0][0].mse_matrix)
    assert np.isnan(pairs[2][0].mse_matrix)


def test_holdout_full_fraction_self_lookup():
    s = sample_surface(Torus(), 2000, seed=0)
    ref = holdout_reference(s.cloud, 60)
    mse_K, mse_H = holdout_evaluation(ref, 1.0, 60, 1)
    assert mse_K == 0.0 and mse_H == 0.0


def test_holdout_curve_and_validation():
    s = sample_surface(Torus(), 3000, seed=0)
    curve = holdout_curve(s.cloud, [0.5, 0.9], k_est=60)
    assert [c[0] for c in curve] == [0.5, 0.9]
    assert all(c[1] > 0 for c in curve)
    with pytest.raises(InvalidInputError):
        holdout_evaluation(s.cloud, 0.0, 60)
    ref = holdout_reference(s.cloud, 60)
    with pytest.raises(InvalidInputError):
        holdout_evaluation(ref, 0.5, 30)


def test_count_inversions():
    assert count_inversions([5, 4, 3]) == 0
    assert count_inversions([5, 6, 3, 4]) == 2
    assert count_inversions([1, 1, 1]) == 0


@pytest.mark.slow
def test_slope_stable_across_seeds():
    ns = [1000, 2000, 4000, 8000, 16000]
    slopes = [convergence_experiment(Torus(5, 2), ns, "pow23", seed=seed, trials=3).slope for seed in range(3)]
    assert max(slopes) - min(slopes) < 0.1
