"""
MC-dropout prediction.

Each of ``m_draws`` stochastic forward passes uses its own draw-indexed
stream, so draws are independent of evaluation order. Means average the
inverse-linked predictors; intervals are equal-tailed quantiles of responses
simulated from the resulting mixture.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .datagen import OutcomeKind, OutcomeSpec
from .exceptions import MissingVariance, ZeroVarianceSurface
from .network import FittedModel, forward, sample_masks
from .numerics import RngStream, as_locations, empirical_quantile

logger = logging.getLogger(__name__)


@dataclass
class PredictConfig:
    m_draws: int = 200
    level: float = 0.95
    y_sample_per_draw: int = 20
    seed: int = 0

    def validate(self) -> None:
        if self.m_draws < 1 or self.y_sample_per_draw < 1:
            raise ValueError('m_draws and y_sample_per_draw must be at least 1.')
        if not 0 < self.level < 1:
            raise ValueError('level must lie in (0, 1).')


@dataclass
class PredictiveSamples:
    eta: np.ndarray
    stream_ids: list[int] = field(default_factory=list)


@dataclass
class Prediction:
    coords: np.ndarray
    outcomes: tuple[OutcomeSpec, ...]
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    sd: np.ndarray
    coord_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.coords = as_locations(self.coords)
        if not self.coord_names:
            self.coord_names = ('x', 'y', 'z')[: self.coords.shape[1]]

    @property
    def outcome_names(self) -> list[str]:
        return [spec.name for spec in self.outcomes]

    def to_frame(self) -> pd.DataFrame:
        n, n_outcomes = self.mean.shape
        frame = pd.DataFrame({'row': np.repeat(np.arange(n), n_outcomes)})
        for k, name in enumerate(self.coord_names):
            frame[name] = np.repeat(self.coords[:, k], n_outcomes)
        frame['outcome'] = np.tile(self.outcome_names, n)
        frame['mean'] = self.mean.ravel()
        frame['lo'] = self.lo.ravel()
        frame['hi'] = self.hi.ravel()
        frame['sd'] = self.sd.ravel()
        return frame

    def to_csv(self, path, header_comment: str | None = None) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            if header_comment:
                fh.write(f'# {header_comment}\n')
            self.to_frame().to_csv(fh, index=False, na_rep='', lineterminator='\n')


def mc_forward(
    model: FittedModel,
    coords,
    covariates,
    pcfg: PredictConfig,
    rng: RngStream | None = None,
) -> PredictiveSamples:
    pcfg.validate()
    inputs, cov = model.design(coords, covariates)
    base = rng or RngStream(pcfg.seed).split('mc')
    eta = np.empty((pcfg.m_draws, len(inputs), len(model.heads)))
    stream_ids = []
    for m in range(pcfg.m_draws):
        draw = base.split('draw', m)
        stream_ids.append(draw.stream_id)
        masks = sample_masks(model.config, draw)
        eta[m] = forward(model.params, masks, inputs, model.config, cov).eta
    return PredictiveSamples(eta=eta, stream_ids=stream_ids)


def _mean_parameters(samples: PredictiveSamples, specs: Sequence[OutcomeSpec]) -> np.ndarray:
    return np.stack([spec.inverse_link(samples.eta[:, :, j]) for j, spec in enumerate(specs)], axis=-1)


def predictive_mean(samples: PredictiveSamples, specs: Sequence[OutcomeSpec]) -> np.ndarray:
    return _mean_parameters(samples, specs).mean(axis=0)


def predictive_sd(samples: PredictiveSamples, specs: Sequence[OutcomeSpec]) -> np.ndarray:
    return _mean_parameters(samples, specs).std(axis=0)


INTERVAL_CHUNK = 500


def _response_draws(spec: OutcomeSpec, eta: np.ndarray, k: int, sigma2: float | None, stream: RngStream):
    m_draws, _, n = eta.shape
    if spec.kind is OutcomeKind.BINARY:
        return stream.bernoulli(np.broadcast_to(spec.inverse_link(eta), (m_draws, k, n)))
    if spec.kind is OutcomeKind.COUNT:
        return stream.poisson(np.broadcast_to(spec.inverse_link(eta), (m_draws, k, n)))
    return eta + math.sqrt(sigma2) * stream.normal((m_draws, k, n))


def predictive_interval(
    samples: PredictiveSamples,
    specs: Sequence[OutcomeSpec],
    sigma2_hat: dict[str, float],
    pcfg: PredictConfig,
    rng: RngStream | None = None,
    chunk_size: int = INTERVAL_CHUNK,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Equal-tailed intervals of simulated responses, ``INTERVAL_CHUNK`` locations at a time.

    Chunk ``c`` of outcome ``j`` draws from ``rng.split('outcome', j).split('chunk', c)``;
    binary and count endpoints are snapped outward to the integer support.
    """
    pcfg.validate()
    if chunk_size < 1:
        raise ValueError('chunk_size must be at least 1.')
    rng = rng or RngStream(pcfg.seed).split('interval')
    m_draws, n, n_outcomes = samples.eta.shape
    k = pcfg.y_sample_per_draw
    tail = (1.0 - pcfg.level) / 2.0
    lo = np.empty((n, n_outcomes))
    hi = np.empty((n, n_outcomes))

    for j, spec in enumerate(specs):
        sigma2 = None
        if spec.kind is OutcomeKind.CONTINUOUS:
            if spec.name not in sigma2_hat:
                raise MissingVariance(spec.name)
            sigma2 = sigma2_hat[spec.name]
        stream = rng.split('outcome', j)
        for c, start in enumerate(range(0, n, chunk_size)):
            cols = slice(start, min(start + chunk_size, n))
            eta = samples.eta[:, None, cols, j]
            draws = _response_draws(spec, eta, k, sigma2, stream.split('chunk', c))
            pooled = draws.reshape(m_draws * k, -1)
            lo[cols, j] = empirical_quantile(pooled, tail, axis=0)
            hi[cols, j] = empirical_quantile(pooled, 1.0 - tail, axis=0)
        if spec.kind is not OutcomeKind.CONTINUOUS:
            lo[:, j] = np.floor(lo[:, j])
            hi[:, j] = np.ceil(hi[:, j])
    return lo, hi


def predict(
    model: FittedModel,
    coords,
    covariates,
    pcfg: PredictConfig,
    coord_names=(),
    rng: RngStream | None = None,
) -> Prediction:
    """MC-dropout means, intervals and sds; ``rng`` defaults to the stream of ``pcfg.seed``."""
    base = rng or RngStream(pcfg.seed)
    samples = mc_forward(model, coords, covariates, pcfg, rng=base.split('mc'))
    lo, hi = predictive_interval(samples, model.heads, model.sigma2, pcfg, rng=base.split('interval'))
    return Prediction(
        coords=coords,
        outcomes=model.heads,
        mean=predictive_mean(samples, model.heads),
        lo=lo,
        hi=hi,
        sd=predictive_sd(samples, model.heads),
        coord_names=tuple(coord_names),
    )


def point_prediction(model: FittedModel, coords, covariates=None, coord_names=()) -> Prediction:
    """Deterministic keep-rescaled predictor; no intervals."""
    eta = model.deterministic_eta(coords, covariates)
    mean = np.column_stack([spec.inverse_link(eta[:, j]) for j, spec in enumerate(model.heads)])
    empty = np.full_like(mean, np.nan)
    return Prediction(
        coords=coords,
        outcomes=model.heads,
        mean=mean,
        lo=empty,
        hi=empty.copy(),
        sd=empty.copy(),
        coord_names=tuple(coord_names),
    )


def composite_score(pred_means) -> np.ndarray:
    """Average of the per-outcome z-scored surfaces."""
    surfaces = np.asarray(pred_means, dtype=float)
    if surfaces.ndim == 1:
        surfaces = surfaces[:, None]
    if surfaces.shape[1] < 1:
        raise ValueError('Need at least one outcome surface.')
    sd = surfaces.std(axis=0)
    if np.any(sd <= 0):
        raise ZeroVarianceSurface('Cannot standardize a constant surface.')
    return ((surfaces - surfaces.mean(axis=0)) / sd).mean(axis=1)


def idw_grid(coords, values, resolution: int, power: float = 2.0, neighbours: int = 12) -> pd.DataFrame:
    """Inverse-distance-weighted interpolation onto a regular grid over the data's bounding box."""
    coords = as_locations(coords)
    values = np.asarray(values, dtype=float)
    if resolution < 2:
        raise ValueError('Grid resolution must be at least 2.')
    axes = [np.linspace(coords[:, k].min(), coords[:, k].max(), resolution) for k in range(coords.shape[1])]
    mesh = np.meshgrid(*axes, indexing='ij')
    grid = np.column_stack([m.ravel() for m in mesh])

    k = min(neighbours, len(coords))
    distance, index = cKDTree(coords).query(grid, k=k)
    distance = distance.reshape(len(grid), k)
    index = index.reshape(len(grid), k)
    exact = distance[:, 0] == 0
    weights = 1.0 / np.where(distance > 0, distance, 1.0) ** power
    scores = np.sum(weights * values[index], axis=1) / np.sum(weights, axis=1)
    scores[exact] = values[index[exact, 0]]

    frame = pd.DataFrame(grid, columns=['x', 'y', 'z'][: coords.shape[1]])
    frame['score'] = scores
    return frame
