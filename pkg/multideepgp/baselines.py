"""
Comparator methods: per-outcome kriging and the deterministic multi-task network.

Kriging fits an exponential variogram to each outcome separately (binary
outcomes as 0/1 indicators, counts on the ``log(1 + y)`` scale) and predicts
with ordinary kriging on raw coordinates. The deterministic network shares
training with MultiDeepGP and differs only in prediction mode.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.spatial.distance import pdist
from scipy.special import ndtri

from .datagen import Dataset, OutcomeKind, OutcomeSpec, SpatialEmbedding
from .exceptions import DegenerateSample, EmptyInput, SingularSystem
from .network import NetworkConfig
from .numerics import RngStream, as_locations, distance_matrix
from .predict import Prediction, point_prediction
from .training import TrainConfig, fit

logger = logging.getLogger(__name__)

# Sill assigned to the nugget-only model of a constant field.
DEGENERATE_SILL = 1e-10


@dataclass
class KrigingConfig:
    variant: str = 'ordinary'
    count_transform: str = 'log1p'
    n_bins: int = 15
    max_dist_frac: float = 0.5
    refine_steps: int = 3
    level: float = 0.95

    def validate(self) -> None:
        if self.variant not in ('ordinary', 'simple'):
            raise ValueError(f'Unknown kriging variant {self.variant!r}.')
        if self.count_transform not in ('log1p', 'identity'):
            raise ValueError(f'Unknown count transform {self.count_transform!r}.')
        if self.n_bins < 3:
            raise ValueError('Need at least three variogram bins.')
        if not 0 < self.max_dist_frac <= 1:
            raise ValueError('max_dist_frac must lie in (0, 1].')
        if not 0 < self.level < 1:
            raise ValueError('level must lie in (0, 1).')


@dataclass(frozen=True)
class VariogramModel:
    nugget: float
    partial_sill: float
    range: float

    def __post_init__(self):
        if self.nugget < 0 or self.partial_sill < 0:
            raise ValueError('Nugget and partial sill must be non-negative.')
        if self.range <= 0:
            raise ValueError('Variogram range must be positive.')
        if self.sill <= 0:
            raise ValueError('Total sill must be positive.')

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    def semivariance(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h > 0, self.nugget + self.partial_sill * (1.0 - np.exp(-h / self.range)), 0.0)

    def covariance(self, h):
        h = np.asarray(h, dtype=float)
        return self.partial_sill * np.exp(-h / self.range) + self.nugget * (h == 0)


@dataclass
class EmpiricalVariogram:
    lags: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return len(self.lags)

    def rows(self) -> list[tuple[float, float, int]]:
        return [(float(h), float(g), int(c)) for h, g, c in zip(self.lags, self.gamma, self.counts)]


@dataclass
class KrigingPrediction:
    mean: np.ndarray
    variance: np.ndarray
    weights: np.ndarray
    clamped: int = 0


def empirical_semivariogram(coords, values, n_bins: int, max_dist: float) -> EmpiricalVariogram:
    """Method-of-moments semivariogram on equal-width lag bins; empty bins are dropped."""
    coords = as_locations(coords)
    values = np.asarray(values, dtype=float)
    if len(coords) < 2 or len(values) != len(coords):
        raise EmptyInput('Need at least two observations with matching locations.')
    if max_dist <= 0 or n_bins < 1:
        raise ValueError('max_dist and n_bins must be positive.')

    distance = pdist(coords)
    half_sq = 0.5 * pdist(values[:, None], metric='sqeuclidean')
    keep = distance <= max_dist
    bins = np.minimum((distance[keep] / max_dist * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(bins, minlength=n_bins)
    sums = np.bincount(bins, weights=half_sq[keep], minlength=n_bins)
    centers = (np.arange(n_bins) + 0.5) * max_dist / n_bins

    nonempty = counts > 0
    if not nonempty.any():
        raise EmptyInput('Every lag bin is empty.')
    return EmpiricalVariogram(
        lags=centers[nonempty],
        gamma=sums[nonempty] / counts[nonempty],
        counts=counts[nonempty],
    )


def _wls_linear(basis: np.ndarray, gamma: np.ndarray, weights: np.ndarray) -> tuple[float, float, float]:
    """Non-negative weighted fit of ``gamma ~ a + b * basis``; returns (a, b, objective)."""
    sw, sf, sff = weights.sum(), weights @ basis, weights @ (basis * basis)
    sg, sfg = weights @ gamma, weights @ (basis * gamma)
    det = sw * sff - sf * sf
    if det > 1e-14 * sw * sff:
        a = (sff * sg - sf * sfg) / det
        b = (sw * sfg - sf * sg) / det
    else:
        a, b = sg / sw, 0.0
    if a < 0:
        a, b = 0.0, max(sfg / sff, 0.0)
    if b < 0:
        a, b = max(sg / sw, 0.0), 0.0
    residual = gamma - a - b * basis
    return a, b, float(weights @ (residual * residual))


def fit_variogram(empirical: EmpiricalVariogram, refine_steps: int = 3, grid_size: int = 40) -> VariogramModel:
    """Weighted least squares (pair count / lag squared) over a refined grid of ranges."""
    if len(empirical) < 3:
        raise DegenerateSample(f'Need at least 3 non-empty lag bins, got {len(empirical)}.')
    lags, gamma = empirical.lags, empirical.gamma
    if np.all(gamma <= 0):
        logger.info('Constant field; using a nugget-only variogram')
        return VariogramModel(nugget=DEGENERATE_SILL, partial_sill=0.0, range=float(lags[-1]))
    weights = empirical.counts / lags ** 2

    def objective(log_range: float):
        return _wls_linear(1.0 - np.exp(-lags / math.exp(log_range)), gamma, weights)

    grid = np.linspace(math.log(lags[0]), math.log(2.0 * lags[-1]), grid_size)
    for _ in range(refine_steps + 1):
        scores = [objective(r)[2] for r in grid]
        best = int(np.argmin(scores))
        lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
        best_log_range = grid[best]
        grid = np.linspace(lo, hi, 21)

    nugget, partial_sill, _ = objective(best_log_range)
    if nugget + partial_sill <= 0:
        nugget = DEGENERATE_SILL
    return VariogramModel(nugget=float(nugget), partial_sill=float(partial_sill), range=math.exp(best_log_range))


def _factor(matrix: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter('error', LinAlgWarning)
        factor = lu_factor(matrix)
    pivots = np.abs(np.diag(factor[0]))
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-13 * pivots.max():
        raise LinAlgWarning('Kriging matrix is numerically singular.')
    return factor


def _factor_with_jitter(matrix: np.ndarray, n: int, jitter: float):
    try:
        return _factor(matrix)
    except LinAlgWarning as exc:
        logger.warning('Kriging system singular (%s); retrying with diagonal jitter %.1e', exc, jitter)
    matrix = matrix.copy()
    matrix[np.arange(n), np.arange(n)] += jitter
    try:
        return _factor(matrix)
    except LinAlgWarning as exc:
        raise SingularSystem(str(exc)) from None


def krige(train_coords, train_values, test_coords, vg: VariogramModel, variant: str = 'ordinary') -> KrigingPrediction:
    train_coords = as_locations(train_coords)
    test_coords = as_locations(test_coords)
    values = np.asarray(train_values, dtype=float)
    n = len(train_coords)
    if n == 0 or len(values) != n:
        raise EmptyInput('Kriging needs at least one training observation.')

    cov = vg.covariance(distance_matrix(train_coords))
    rhs = vg.covariance(distance_matrix(train_coords, test_coords))
    jitter = 1e-10 * vg.sill

    if variant == 'ordinary':
        system = np.ones((n + 1, n + 1))
        system[:n, :n] = cov
        system[n, n] = 0.0
        rhs = np.vstack([rhs, np.ones((1, rhs.shape[1]))])
        solution = lu_solve(_factor_with_jitter(system, n, jitter), rhs)
        weights, multiplier = solution[:n], solution[n]
        mean = weights.T @ values
        variance = vg.sill - np.sum(weights * rhs[:n], axis=0) - multiplier
    elif variant == 'simple':
        level = values.mean()
        weights = lu_solve(_factor_with_jitter(cov, n, jitter), rhs)
        mean = level + weights.T @ (values - level)
        variance = vg.sill - np.sum(weights * rhs, axis=0)
    else:
        raise ValueError(f'Unknown kriging variant {variant!r}.')

    negative = variance < 0
    clamped = int(negative.sum())
    if clamped:
        logger.info('Clamped %d negative kriging variances to zero', clamped)
        variance = np.where(negative, 0.0, variance)
    return KrigingPrediction(mean=mean, variance=variance, weights=weights.T, clamped=clamped)


def _fit_and_krige(coords, values, test_coords, kcfg: KrigingConfig) -> KrigingPrediction:
    coords = as_locations(coords)
    diameter = float(pdist(coords).max()) if len(coords) > 1 else 0.0
    if diameter <= 0:
        raise DegenerateSample('Training locations do not span any distance.')
    empirical = empirical_semivariogram(coords, values, kcfg.n_bins, kcfg.max_dist_frac * diameter)
    vg = fit_variogram(empirical, kcfg.refine_steps)
    logger.debug('Variogram nugget=%.4g partial_sill=%.4g range=%.4g', vg.nugget, vg.partial_sill, vg.range)
    return krige(coords, values, test_coords, vg, kcfg.variant)


def krige_outcome(
    train: Dataset,
    test_coords,
    outcome: OutcomeSpec,
    kcfg: KrigingConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-location (mean, lo, hi) on the response scale; binary outcomes get no interval."""
    kcfg = kcfg or KrigingConfig()
    kcfg.validate()
    if outcome.name not in train.outcome_names:
        raise KeyError(f"Outcome '{outcome.name}' is not in the training data.")
    column = train.column(outcome.name)
    observed = ~np.isnan(column)
    coords, values = train.coords[observed], column[observed]
    z = float(ndtri(1.0 - (1.0 - kcfg.level) / 2.0))
    test_coords = as_locations(test_coords)
    missing = np.full(len(test_coords), np.nan)

    if outcome.kind is OutcomeKind.BINARY:
        result = _fit_and_krige(coords, values, test_coords, kcfg)
        outside = (result.mean < 0) | (result.mean > 1)
        if outside.any():
            logger.info('Indicator kriging: clamped %d of %d probabilities to [0, 1]', int(outside.sum()), len(outside))
        return np.clip(result.mean, 0.0, 1.0), missing, missing.copy()

    if outcome.kind is OutcomeKind.COUNT:
        log_scale = kcfg.count_transform == 'log1p'
        result = _fit_and_krige(coords, np.log1p(values) if log_scale else values, test_coords, kcfg)
        sd = np.sqrt(result.variance)
        back = np.expm1 if log_scale else (lambda v: v)
        mean = np.maximum(back(result.mean), 0.0)
        lo = np.floor(np.maximum(back(result.mean - z * sd), 0.0))
        hi = np.ceil(np.maximum(back(result.mean + z * sd), 0.0))
        return mean, lo, hi

    result = _fit_and_krige(coords, values, test_coords, kcfg)
    sd = np.sqrt(result.variance)
    return result.mean, result.mean - z * sd, result.mean + z * sd


def kriging_prediction(train: Dataset, test_coords, kcfg: KrigingConfig | None = None, coord_names=()) -> Prediction:
    """Kriging for every outcome of ``train`` in the shared prediction layout."""
    columns = [krige_outcome(train, test_coords, spec, kcfg) for spec in train.outcomes]
    mean, lo, hi = (np.column_stack([c[k] for c in columns]) for k in range(3))
    return Prediction(
        coords=test_coords,
        outcomes=train.outcomes,
        mean=mean,
        lo=lo,
        hi=hi,
        sd=np.full_like(mean, np.nan),
        coord_names=tuple(coord_names) or train.coord_names,
    )


def dnn_fit_predict(
    train: Dataset,
    test_coords,
    net: NetworkConfig,
    tcfg: TrainConfig,
    embedding: SpatialEmbedding | None = None,
    rng: RngStream | None = None,
    test_covariates=None,
) -> Prediction:
    """Train with dropout, predict with the mask-free keep-rescaled pass (means only)."""
    model, _ = fit(train, net, tcfg, embedding=embedding, rng=rng)
    return point_prediction(model, test_coords, test_covariates, coord_names=train.coord_names)
