import math

import numpy as np
import pytest

from mixtile.covmath import DistanceMetric, MaternParams
from mixtile.geodata import GeoDataset, generate_field, generate_locations, kfold_split
from mixtile.predict import krige, pmse_kfold
from mixtile.tilestore import PrecisionPolicy

from oracles import dense_cholesky, dense_krige, dense_matern_cov, matern_closed

EUCLID = DistanceMetric.euclidean()
DP = PrecisionPolicy.dp()
THETA = MaternParams(1.0, 0.1, 0.5)


def sim_dataset(n, theta=THETA, seed=0):
    locs = generate_locations(n, seed=seed)
    return generate_field(locs, theta, seed=seed + 1)


def test_krige_interpolates_training_points():
    ds = sim_dataset(40, seed=1)
    preds = krige(ds, ds.locations, THETA, 8, DP)
    assert np.allclose(preds, ds.z, rtol=0, atol=1e-6)


def test_krige_far_field_returns_prior_mean():
    ds = sim_dataset(30, seed=2)
    far = np.array([[50.0, 50.0]])
    preds = krige(ds, far, THETA, 8, DP)
    assert abs(preds[0]) < 1e-8


def test_krige_matches_dense_oracle():
    theta = MaternParams(1.4, 0.12, 1.5)
    ds = sim_dataset(40, theta=theta, seed=3)
    test_locs = generate_locations(10, seed=99)
    v, rho, nu = theta.as_tuple()
    sigma11 = dense_matern_cov(ds.locations, v, rho, nu, matern_closed)
    m = len(test_locs)
    sigma21 = np.empty((m, ds.n))
    for i in range(m):
        for j in range(ds.n):
            r = math.hypot(test_locs[i, 0] - ds.locations[j, 0],
                           test_locs[i, 1] - ds.locations[j, 1])
            sigma21[i, j] = matern_closed(r, v, rho, nu)
    expected = dense_krige(sigma11, sigma21, ds.z)
    preds = krige(ds, test_locs, theta, 8, DP)
    assert np.allclose(preds, expected, rtol=0, atol=1e-9)


def test_krige_batch_matches_singletons():
    ds = sim_dataset(25, seed=4)
    test_locs = generate_locations(6, seed=44)
    batch = krige(ds, test_locs, THETA, 8, DP)
    singles = [krige(ds, test_locs[i:i + 1], THETA, 8, DP)[0] for i in range(6)]
    assert np.allclose(batch, singles, rtol=0, atol=1e-12)


def test_krige_full_band_mixed_equals_dp_bitwise():
    ds = sim_dataset(40, seed=5)
    test_locs = generate_locations(8, seed=55)
    a = krige(ds, test_locs, THETA, 8, DP)
    b = krige(ds, test_locs, THETA, 8, PrecisionPolicy.mp(diag_thick=5))
    assert np.array_equal(a, b)


def test_krige_mixed_close_to_dp():
    ds = sim_dataset(64, seed=6)
    test_locs = generate_locations(8, seed=66)
    a = krige(ds, test_locs, THETA, 8, DP)
    b = krige(ds, test_locs, THETA, 8, PrecisionPolicy.mp(diag_thick=1))
    assert not np.array_equal(a, b)
    assert np.allclose(a, b, rtol=0, atol=1e-4)


def test_krige_rejects_bad_test_shape():
    ds = sim_dataset(10, seed=7)
    with pytest.raises(ValueError):
        krige(ds, np.ones((3, 3)), THETA, 8, DP)


def test_pmse_truth_predictor_scores_zero():
    ds = sim_dataset(30, seed=8)
    truth = {tuple(loc): val for loc, val in zip(ds.locations, ds.z)}

    def oracle_predictor(train, test_locs, params, policy):
        return np.array([truth[tuple(loc)] for loc in test_locs])

    report = pmse_kfold(ds, THETA, 8, DP, k=5, predictor=oracle_predictor)
    assert report.pmse == 0.0
    assert all(m == 0.0 for m in report.fold_mse)
    assert np.array_equal(report.predictions, ds.z)


def test_pmse_zero_predictor_scores_signal_power():
    ds = sim_dataset(30, seed=9)

    def zeros(train, test_locs, params, policy):
        return np.zeros(len(test_locs))

    report = pmse_kfold(ds, THETA, 8, DP, k=5, predictor=zeros)
    assert math.isclose(report.pmse, float(np.mean(ds.z ** 2)), rel_tol=1e-12)


def test_pmse_kriging_beats_prior_mean():
    ds = sim_dataset(80, theta=MaternParams(1.0, 0.2, 1.5), seed=10)

    def zeros(train, test_locs, params, policy):
        return np.zeros(len(test_locs))

    base = pmse_kfold(ds, MaternParams(1.0, 0.2, 1.5), 16, DP, k=5, predictor=zeros)
    krig = pmse_kfold(ds, MaternParams(1.0, 0.2, 1.5), 16, DP, k=5)
    assert krig.pmse < 0.5 * base.pmse


def test_pmse_explicit_folds_match_default():
    ds = sim_dataset(30, seed=11)
    folds = kfold_split(30, 6, seed=3)
    a = pmse_kfold(ds, THETA, 8, DP, k=6, seed=3)
    b = pmse_kfold(ds, THETA, 8, DP, folds=folds)
    assert a.pmse == b.pmse
    assert np.array_equal(a.predictions, b.predictions)


def test_pmse_covers_every_row_once():
    ds = sim_dataset(23, seed=12)
    report = pmse_kfold(ds, THETA, 8, DP, k=4)
    assert report.k == 4
    assert not np.any(np.isnan(report.predictions))
    total = sum(m * len(f) for m, f in zip(report.fold_mse,
                                           kfold_split(23, 4, seed=0).folds))
    assert math.isclose(total / 23, report.pmse, rel_tol=1e-12)


def test_pmse_refit_smoke():
    from mixtile.mle import OptimizerConfig
    ds = sim_dataset(40, seed=13)
    report = pmse_kfold(ds, None, 16, DP, k=2, refit=True,
                        optimizer_config=OptimizerConfig(max_iters=15))
    assert np.isfinite(report.pmse)


def test_pmse_rejects_bad_predictor_shape():
    ds = sim_dataset(12, seed=14)

    def bad(train, test_locs, params, policy):
        return np.zeros(len(test_locs) + 1)

    with pytest.raises(ValueError):
        pmse_kfold(ds, THETA, 8, DP, k=3, predictor=bad)
