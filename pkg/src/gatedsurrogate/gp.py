"""Exact Gaussian Process regression on a bounded design box."""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, InputError, NumericalError
from .kernels import KernelParams, cross_cov, gram

logger = logging.getLogger(__name__)

MAX_JITTER = 1e-2
JITTER_FACTOR = 10.0


@dataclass(frozen=True)
class Prediction:
    mean: float
    stddev: float
    # latent variance in standardized output units; what the uncertainty gate compares
    variance: float
    out_of_bounds: bool = False


@dataclass(frozen=True, eq=False)
class GPModel:
    """A fitted GP. Arrays are treated as read-only after construction."""

    params: KernelParams
    train_x: np.ndarray
    train_y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_std: float
    lows: np.ndarray
    highs: np.ndarray
    raw_x: np.ndarray = field(repr=False)
    raw_y: np.ndarray = field(repr=False)

    @property
    def n_train(self):
        return self.train_x.shape[0]

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.lows) / (self.highs - self.lows)


def _box_arrays(bounds):
    lows = np.asarray(bounds.lows, dtype=np.float64)
    highs = np.asarray(bounds.highs, dtype=np.float64)
    return lows, highs


def cholesky_with_jitter(x_norm, params: KernelParams):
    """Factor ``K + noise*I``, multiplying the noise by 10 on failure up to 1e-2.

    Returns ``(chol, params_used)``.
    """
    noise = params.noise_variance
    while True:
        k = gram(x_norm, params, noise)
        try:
            return np.linalg.cholesky(k), params.with_noise(noise)
        except np.linalg.LinAlgError:
            if noise >= MAX_JITTER:
                raise NumericalError(
                    f"Cholesky failed for n={x_norm.shape[0]} even with noise={noise:g}"
                ) from None
            noise = min(noise * JITTER_FACTOR, MAX_JITTER)
            logger.debug("Cholesky failed, escalating noise to %g", noise)


def fit(xs, ys, p: KernelParams, bounds) -> GPModel:
    """Fit an exact GP to ``(xs, ys)``.

    Inputs are mapped to the unit hypercube of ``bounds`` and outputs are
    standardized to zero mean and unit variance (``y_std = 1`` when all
    outputs are equal).
    """
    xs = np.array(xs, dtype=np.float64, ndmin=2)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.shape[0] < 1:
        raise InputError("fit needs at least one sample")
    if xs.shape[0] != ys.shape[0]:
        raise InputError(f"{xs.shape[0]} inputs but {ys.shape[0]} outputs")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise InputError("NaN or Inf in training data")
    lows, highs = _box_arrays(bounds)
    if xs.shape[1] != lows.shape[0]:
        raise InputError(f"points have dimension {xs.shape[1]}, bounds {lows.shape[0]}")
    if np.any(xs < lows) or np.any(xs > highs):
        raise InputError("training point outside bounds")

    x_norm = (xs - lows) / (highs - lows)
    y_mean = float(np.mean(ys))
    y_std = float(np.std(ys))
    if not y_std > 0:
        y_std = 1.0
    y_stdz = (ys - y_mean) / y_std

    chol, used = cholesky_with_jitter(x_norm, p)
    alpha = solve_triangular(chol.T, solve_triangular(chol, y_stdz, lower=True), lower=False)
    return GPModel(
        params=used,
        train_x=x_norm,
        train_y=y_stdz,
        chol=chol,
        alpha=alpha,
        y_mean=y_mean,
        y_std=y_std,
        lows=lows,
        highs=highs,
        raw_x=xs,
        raw_y=ys,
    )


def predict_arrays(m: GPModel, xs):
    """Vectorized posterior for many points.

    Returns ``(mean, stddev, latent_variance)``; the first two in output
    units, the last in standardized units.
    """
    xq = m.normalize(np.array(xs, dtype=np.float64, ndmin=2))
    k_star = cross_cov(m.train_x, xq, m.params)
    mean_std = k_star.T @ m.alpha
    v = solve_triangular(m.chol, k_star, lower=True)
    var = m.params.signal_variance - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var, 0.0)
    return m.y_mean + m.y_std * mean_std, m.y_std * np.sqrt(var), var


def predict(m: GPModel, x) -> Prediction:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != m.lows.shape[0]:
        raise InputError(f"point has dimension {x.shape[0]}, model {m.lows.shape[0]}")
    oob = bool(np.any(x < m.lows) or np.any(x > m.highs))
    if oob:
        logger.warning("predicting outside the fitted bounds at %s", x)
    mean, sd, var = predict_arrays(m, x[None, :])
    return Prediction(float(mean[0]), float(sd[0]), float(var[0]), oob)


def cv_folds(n, folds, seed):
    """Seeded shuffle of ``range(n)`` split into contiguous folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def grid_search_cv(xs, ys, grid, folds, seed, bounds):
    """Pick the kernel cell with the lowest mean validation RMSE.

    Returns ``(best_params, scores)`` where ``scores[i]`` is the mean RMSE of
    ``grid[i]`` (``inf`` when every fold failed to factor). Ties keep the
    first cell in grid order.
    """
    xs = np.array(xs, dtype=np.float64, ndmin=2)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    grid = list(grid)
    if not grid:
        raise ConfigError("empty hyperparameter grid")
    if folds < 2:
        raise ConfigError(f"folds must be >= 2, got {folds}")
    if xs.shape[0] < folds:
        raise ConfigError(f"{xs.shape[0]} samples cannot fill {folds} folds")

    split = cv_folds(xs.shape[0], folds, seed)
    scores = []
    for p in grid:
        fold_rmse = []
        for k, val in enumerate(split):
            train = np.concatenate([f for j, f in enumerate(split) if j != k])
            try:
                m = fit(xs[train], ys[train], p, bounds)
            except NumericalError:
                continue
            mean, _, _ = predict_arrays(m, xs[val])
            fold_rmse.append(float(np.sqrt(np.mean((ys[val] - mean) ** 2))))
        scores.append(float(np.mean(fold_rmse)) if fold_rmse else float("inf"))

    finite = [s for s in scores if np.isfinite(s)]
    if not finite:
        raise ConfigError("every grid cell failed to factor on every fold")
    best = int(np.argmin(scores))  # first minimum wins
    return grid[best], scores


def default_grid(nus=(0.5, 1.5, 2.5), length_scales=(0.25, 0.75, 2.0, 4.0),
                 signal_variances=(1.0,), noise_variances=(1e-6,)):
    return [
        KernelParams(nu, ls, sf, sn)
        for nu in nus
        for ls in length_scales
        for sf in signal_variances
        for sn in noise_variances
    ]


def loo_variances(m: GPModel) -> np.ndarray:
    """Leave-one-out latent variance at each training input, standardized units.

    Uses ``var_-i = 1 / [(K + noise*I)^-1]_ii - noise`` so no refits are needed.
    """
    eye = np.eye(m.n_train)
    linv = solve_triangular(m.chol, eye, lower=True)
    diag_inv = np.einsum("ij,ij->j", linv, linv)
    return np.maximum(1.0 / diag_inv - m.params.noise_variance, 0.0)
