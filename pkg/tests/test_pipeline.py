import numpy as np
import pytest

from commglasso.pipeline import SolverConfig, WeightConfig, fit_method, residualize
from commglasso.simulation import gen_grouped_latent, grouped_latent_spec
from commglasso.tuning import PenaltyGrid
from commglasso.types import ConfigError, Dataset, SignMode, WeightMatrix


@pytest.fixture(scope="module")
def small_instance():
    spec = grouped_latent_spec(400)
    data, truth = gen_grouped_latent(spec, seed=7)
    _, resid, sigma = residualize(data)
    return data, truth, resid


SOLVER = SolverConfig(eps=1e-8, max_iter=4000)
MAIN = PenaltyGrid((0.02,), (0.08,), (1e-4,), folds=2, seed=0)
INIT = PenaltyGrid((0.02,), (0.08,), (0.0,), folds=2, seed=0)


def test_residualize_without_covariates_centers_columns():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4)) + 5.0
    data = Dataset(X, np.empty((30, 0)))
    fit, resid, sigma = residualize(data)
    assert fit is None
    assert np.allclose(resid.mean(axis=0), 0.0, atol=1e-12)
    assert sigma.shape == (4, 4)


def test_residualize_with_covariates(small_instance):
    data, _, _ = small_instance
    fit, resid, sigma = residualize(data)
    assert fit is not None
    assert np.max(np.abs(data.C.T @ resid)) < 1e-6


def test_fit_method_lvggm_and_ht(small_instance):
    _, truth, resid = small_instance
    lv = fit_method("lvggm", resid, MAIN, INIT, truth.sign_mode, SOLVER)
    assert lv.params.tau == 0.0
    assert np.array_equal(lv.weights.W, np.ones((45, 45)))

    ht = fit_method("ht-lvggm", resid, MAIN, INIT, truth.sign_mode, SOLVER, ht_c=1.0)
    thr = 1.0 / np.sqrt(resid.shape[0])
    assert ht.ht_threshold == pytest.approx(thr)
    # S identical to the pilot; small L entries zeroed, large ones untouched
    assert np.array_equal(ht.decomposition.S, lv.decomposition.S)
    mask_small = np.abs(lv.decomposition.L) <= thr
    assert np.all(ht.decomposition.L[mask_small] == 0.0)
    assert np.array_equal(
        ht.decomposition.L[~mask_small], lv.decomposition.L[~mask_small]
    )


def test_fit_method_nonapmle_uses_uniform_weights(small_instance):
    _, truth, resid = small_instance
    mf = fit_method("nonapmle", resid, MAIN, init_grid=None, sign_mode=truth.sign_mode, solver=SOLVER)
    assert np.array_equal(mf.weights.W, np.ones((45, 45)))
    assert mf.pilot is None


def test_fit_method_proposed_uses_adaptive_weights(small_instance):
    _, truth, resid = small_instance
    mf = fit_method("proposed", resid, MAIN, INIT, truth.sign_mode, SOLVER)
    assert mf.pilot is not None
    assert not np.array_equal(mf.weights.W, np.ones((45, 45)))
    # weights follow the pilot: largest pilot entry gets the smallest weight
    pilot_L = np.abs(mf.pilot.decomposition.L)
    i, j = np.unravel_index(np.argmax(pilot_L), pilot_L.shape)
    assert mf.weights.W[i, j] == np.min(mf.weights.W)
    assert mf.report.converged


def test_fit_method_validation(small_instance):
    _, truth, resid = small_instance
    with pytest.raises(ConfigError):
        fit_method("ridge", resid, MAIN, INIT)
    with pytest.raises(ConfigError):
        fit_method("proposed", resid, MAIN, init_grid=None)
    with pytest.raises(ConfigError):
        fit_method("proposed", resid, None, INIT)
    bad_init = PenaltyGrid((0.02,), (0.08,), (0.1,), folds=2, seed=0)
    with pytest.raises(ConfigError):
        fit_method("lvggm", resid, MAIN, bad_init)
