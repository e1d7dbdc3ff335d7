import numpy as np
import pytest

from ldoup.errors import ConstraintInfeasibleError, NoRepeatedLineError, OptimizerFailedError
from ldoup.estimation import (LOG, OptimizeOptions, covariance_constraint, feasible_a, fit_ouwvag,
                              fit_wvagou, lambda_from_acf, optimize, recover_lambda_eta,
                              wvagou_moment_init)
from ldoup.moments import gammas, zstar_moments
from ldoup.params import ObservationSet, reference_model
from ldoup.sampling import sample_path
from ldoup.workflows import simulate_one

# RMSEs of a 500-replicate study at m = 1000; used as yardsticks for single fits
WVAGOU_RMSE = {"a": 0.0483, "alpha1": 0.0382, "alpha2": 0.0205,
               "sigma11": 0.0139, "sigma22": 0.0055, "sigma12": 0.0108}


def test_optimize_finds_quadratic_maximum():
    opt = optimize(lambda x: -((x[0] - 1) ** 2) - (x[1] + 2) ** 2, [0.0, 0.0],
                   options=OptimizeOptions(step=0.5))
    assert opt.converged
    np.testing.assert_allclose(opt.x, [1, -2], atol=1e-5)
    assert opt.value > opt.init_value


def test_optimize_respects_log_transform():
    seen = []

    def f(x):
        seen.append(np.min(x))
        return -np.sum((np.log(x) - 1) ** 2)

    opt = optimize(f, [0.5, 5.0], LOG)
    assert min(seen) > 0
    np.testing.assert_allclose(opt.x, [np.e, np.e], rtol=1e-4)


def test_optimize_returns_start_when_nothing_improves():
    opt = optimize(lambda x: -abs(x[0]), [0.0], options=OptimizeOptions(maxfev=5))
    assert not opt.converged
    assert opt.x == [0.0]


def test_optimize_rejects_bad_start():
    with pytest.raises(OptimizerFailedError):
        optimize(lambda x: np.nan, [1.0])


@pytest.fixture(scope="module")
def fine_path():
    return sample_path(reference_model("wvag-ou", delta=0.01), 20_000, 31).observations()


def test_exact_recovery(fine_path):
    rec = recover_lambda_eta(fine_path)
    assert abs(rec.lambda_hat - 0.5) < 1e-8
    np.testing.assert_allclose(rec.eta_hat, [-0.06, 0.0], atol=1e-8)
    assert rec.n_matches > 1000


def test_recovery_refuses_infinite_activity():
    obs = sample_path(reference_model("ou-wvag"), 200, 32, euler_step=1e-2).observations()
    with pytest.raises(NoRepeatedLineError):
        recover_lambda_eta(obs)


def test_recovery_needs_three_points():
    with pytest.raises(NoRepeatedLineError):
        recover_lambda_eta(ObservationSet(np.zeros((2, 2)), 1.0))


def test_lambda_from_acf():
    obs = sample_path(reference_model("wvag-ou"), 20_000, 33).observations()
    assert lambda_from_acf(obs) == pytest.approx(0.5, abs=0.03)


def test_moment_init_is_near_truth():
    model = reference_model("wvag-ou")
    obs = sample_path(model, 20_000, 34).observations()
    w = wvagou_moment_init(obs, 0.5, model.wvag.eta)
    assert w.validate() == []
    np.testing.assert_allclose(w.alpha, [0.9, 0.5], rtol=0.1)
    np.testing.assert_allclose(np.diag(w.Sigma), [0.18, 0.08], rtol=0.1)


def test_covariance_constraint_inverts_the_moment():
    model = reference_model("ou-wvag")
    w = model.wvag
    g2 = gammas(model.lam, model.delta)[1]
    cov = zstar_moments(model).cross_cov[0, 1]
    assert covariance_constraint(cov, w.a, w.alpha, w.mu, g2) == pytest.approx(0.09)
    lo, hi = feasible_a(cov, w.alpha, w.mu, np.diag(w.Sigma), g2)
    assert lo < w.a < hi <= 1 / 0.9
    for a in np.linspace(lo, hi, 7)[1:-1]:
        s12 = covariance_constraint(cov, a, w.alpha, w.mu, g2)
        assert abs(s12) < np.sqrt(w.Sigma[0, 0] * w.Sigma[1, 1])


def test_feasible_a_detects_impossible_covariance():
    with pytest.raises(ConstraintInfeasibleError):
        feasible_a(50.0, [0.9, 0.5], [0.0, 0.0], [0.18, 0.08], 0.86)


@pytest.mark.slow
def test_wvagou_fit_recovers_parameters():
    model = reference_model("wvag-ou")
    obs = sample_path(model, 1000, 35).observations()
    res = fit_wvagou(obs, 0.5, model.wvag.eta, grid_points=(2**11, 2**8))
    truth = {"a": 1.0, "alpha1": 0.9, "alpha2": 0.5, "sigma11": 0.18, "sigma22": 0.08, "sigma12": 0.09}
    for k, v in truth.items():
        assert abs(res.theta_hat[k] - v) < 4 * WVAGOU_RMSE[k], k
    assert [s["stage"] for s in res.stage_trace] == ["marginal1", "marginal2", "joint"]
    assert res.stage_trace[-1]["loglik"] >= res.stage_trace[-1]["init_loglik"]


@pytest.mark.slow
def test_ouwvag_fit_runs_all_stages():
    model = reference_model("ou-wvag")
    obs = sample_path(model, 1000, 36, euler_step=1e-3).observations()
    res = fit_ouwvag(obs, grid_points_2d=2**8)
    assert [s["stage"] for s in res.stage_trace] == ["acf", "marginal1", "marginal2", "joint"]
    t = res.theta_hat
    assert abs(t["lambda"] - 0.5) < 0.1
    assert abs(t["alpha1"] - 0.9) < 0.25 and abs(t["alpha2"] - 0.5) < 0.2
    assert abs(t["sigma11"] - 0.18) < 0.07 and abs(t["sigma22"] - 0.08) < 0.025
    assert 0 < t["a"] < 1 / max(t["alpha1"], t["alpha2"])
    assert res.to_dict()["converged"] in (True, False)


@pytest.mark.slow
def test_ouwvag_fit_survives_heavy_tailed_moment_start():
    # this path's sample kurtosis puts the starting alpha1 near 2.2, where the
    # innovation density is too singular for the grid; the fit must back off
    obs = simulate_one(reference_model("ou-wvag"), 1000, 2024, 16).observations()
    res = fit_ouwvag(obs, grid_points_2d=2**8)
    assert abs(res.theta_hat["alpha1"] - 0.9) < 0.3
    assert res.stage_trace[1]["loglik"] >= res.stage_trace[1]["init_loglik"]
