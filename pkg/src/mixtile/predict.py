"""Kriging prediction and k-fold prediction error.

The conditional mean at new locations is cross_cov @ solve(cov, z). The
training covariance is factored under the caller's precision policy; the
cross-covariance block and the final product always run FP64, so precision
handling stays inside the factorization.
"""

from dataclasses import dataclass

import numpy as np

from .covmath import matern_array, pairwise_distance
from .factor import cholesky, solve
from .geodata import kfold_split
from .mle import fit_matern
from .tilestore import assemble_covariance


@dataclass(frozen=True)
class PredictionReport:
    """Held-out predictions in original row order plus the error summary."""

    predictions: np.ndarray
    fold_mse: tuple
    pmse: float
    k: int

    def as_dict(self):
        return {
            "pmse": self.pmse,
            "k": self.k,
            "fold_mse": list(self.fold_mse),
        }


def krige(train, test_locations, params, nb, policy, threads=1):
    """Conditional-mean prediction at test locations given training data."""
    test_locations = np.asarray(test_locations, dtype=np.float64)
    if test_locations.ndim != 2 or test_locations.shape[1] != 2:
        raise ValueError(f"test locations must be (m, 2), got {test_locations.shape}")
    if not np.all(np.isfinite(test_locations)):
        raise ValueError("test locations must be finite")
    matrix = assemble_covariance(train, params, nb, policy)
    fac = cholesky(matrix, threads=threads)
    weights = solve(fac, train.z)
    dist = pairwise_distance(test_locations, train.locations, train.metric)
    cross = matern_array(dist, params)
    return cross @ weights


def pmse_kfold(dataset, params, nb, policy, k=10, seed=0, folds=None,
               refit=False, optimizer_config=None, predictor=None, threads=1):
    """k-fold held-out prediction error.

    Each fold is predicted from the remaining rows; pmse is the total
    squared error over all n rows. With refit=True the Matern parameters
    are re-estimated on every training fold and `params` is ignored. A
    custom `predictor(train, test_locations, params, policy)` replaces the
    kriging step; fold bookkeeping and scoring stay the same.
    """
    n = dataset.n
    if folds is None:
        folds = kfold_split(n, k, seed=seed)
    predictions = np.full(n, np.nan)
    sq_errors = []
    for test_idx in folds.folds:
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        train = dataset.take(train_idx)
        test_locs = dataset.locations[test_idx]
        use = params
        if refit:
            use = fit_matern(train, nb, policy, config=optimizer_config,
                             threads=threads).params
        if predictor is None:
            vals = krige(train, test_locs, use, nb, policy, threads=threads)
        else:
            vals = np.asarray(predictor(train, test_locs, use, policy),
                              dtype=np.float64)
        if vals.shape != (len(test_idx),):
            raise ValueError(f"predictor returned shape {vals.shape}, "
                             f"expected ({len(test_idx)},)")
        predictions[test_idx] = vals
        err = vals - dataset.z[test_idx]
        sq_errors.append(float(err @ err))
    fold_mse = tuple(s / len(idx) for s, idx in zip(sq_errors, folds.folds))
    return PredictionReport(
        predictions=predictions,
        fold_mse=fold_mse,
        pmse=sum(sq_errors) / n,
        k=folds.k,
    )
