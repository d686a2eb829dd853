"""
Dense linear algebra and deterministic random streams used across the package.

Matrices are plain 2-D ``numpy`` float arrays. Random numbers come from
``RngStream``, a counter-based Philox generator keyed by ``(seed, stream_id)``,
so a stream can be split into independent children by hashing keys such as a
replicate index and a pipeline stage name. Child streams never depend on how
many draws the parent has made, which keeps parallel replicates reproducible.
"""
from __future__ import annotations

import hashlib
import logging

import numpy as np
from scipy.linalg import lapack
from scipy.spatial.distance import cdist
from scipy.special import ndtri
from scipy.stats import poisson

from .exceptions import DimensionMismatch, EmptyInput, NotPositiveDefinite

logger = logging.getLogger(__name__)

UINT64_MASK = (1 << 64) - 1
_UNIFORM_BITS = 53
_UNIFORM_SCALE = 2.0 ** -_UNIFORM_BITS


def stream_id(*keys) -> int:
    """Hash an ordered tuple of ints/strings to a 64-bit stream id."""
    digest = hashlib.blake2b(repr(tuple(keys)).encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Every variate is produced from open-interval uniforms by inverse CDF, so
    each normal, Bernoulli or Poisson draw consumes exactly one uniform.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & UINT64_MASK
        self.stream_id = int(stream_id) & UINT64_MASK
        key = self.seed | (self.stream_id << 64)
        self._generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f'RngStream(seed={self.seed}, stream_id={self.stream_id})'

    def split(self, *keys) -> 'RngStream':
        return RngStream(self.seed, stream_id(self.stream_id, *keys))

    def uniform(self, size=None) -> np.ndarray:
        raw = self._generator.integers(0, 1 << _UNIFORM_BITS, size=size, dtype=np.int64)
        return (raw + 0.5) * _UNIFORM_SCALE

    def normal(self, size=None) -> np.ndarray:
        return ndtri(self.uniform(size))

    def bernoulli(self, prob) -> np.ndarray:
        prob = np.asarray(prob, dtype=float)
        return (self.uniform(prob.shape) < prob).astype(float)

    def poisson(self, rate) -> np.ndarray:
        rate = np.asarray(rate, dtype=float)
        u = self.uniform(rate.shape)
        positive = rate > 0
        draws = np.zeros(rate.shape)
        draws[positive] = poisson.ppf(u[positive], rate[positive])
        return draws

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind='stable')


def as_locations(coords) -> np.ndarray:
    """Return coordinates as an ``(n, d)`` array; a 1-D input is one axis."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.ndim != 2:
        raise DimensionMismatch(f'Locations must be 1-D or 2-D, got shape {coords.shape}.')
    if not np.all(np.isfinite(coords)):
        raise ValueError('Location coordinates must be finite.')
    return coords


def distance_matrix(a, b=None) -> np.ndarray:
    a = as_locations(a)
    b = a if b is None else as_locations(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f'Coordinate dimensions differ: {a.shape[1]} vs {b.shape[1]}.')
    return cdist(a, b)


def cholesky(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f'Expected a non-empty square matrix, got shape {a.shape}.')
    if not np.all(np.isfinite(a)):
        raise ValueError('Matrix entries must be finite.')
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValueError('Matrix is not symmetric.')

    n = a.shape[0]
    diagonal = np.diag(a)
    threshold = n * 1e-12 * float(np.max(diagonal))
    if np.max(diagonal) <= 0:
        raise NotPositiveDefinite(float(np.max(diagonal)), int(np.argmax(diagonal)))

    lower, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(float('nan'), info - 1)
    if info < 0:
        raise ValueError(f'Illegal argument {-info} passed to the Cholesky routine.')

    pivots = np.diag(lower) ** 2
    worst = int(np.argmin(pivots))
    if pivots[worst] <= threshold:
        raise NotPositiveDefinite(float(pivots[worst]), worst)
    return lower


def cholesky_with_jitter(a, jitter: float = 1e-8) -> np.ndarray:
    """Cholesky factor, retrying once with ``jitter`` added to the diagonal."""
    try:
        return cholesky(a)
    except NotPositiveDefinite as exc:
        logger.warning('Cholesky failed (%s); retrying with diagonal jitter %.1e', exc, jitter)
        a = np.asarray(a, dtype=float)
        return cholesky(a + jitter * np.eye(a.shape[0]))


def mvn_sample(mean, chol_lower, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Draw ``mean + L z`` with ``z`` standard normal; ``size`` stacks draws as rows."""
    mean = np.asarray(mean, dtype=float)
    chol_lower = np.asarray(chol_lower, dtype=float)
    if mean.ndim != 1 or chol_lower.shape != (mean.size, mean.size):
        raise DimensionMismatch(
            f'Mean of length {mean.size} does not match factor of shape {chol_lower.shape}.'
        )
    if size is None:
        return mean + chol_lower @ rng.normal(mean.size)
    return mean + rng.normal((size, mean.size)) @ chol_lower.T


def exp_cov(distance, sigma2: float, rho: float):
    distance = np.asarray(distance, dtype=float)
    if np.any(distance < 0):
        raise ValueError('Distances must be non-negative.')
    value = sigma2 * np.exp(-distance / rho)
    return float(value) if value.ndim == 0 else value


def empirical_quantile(samples, level: float, axis=None):
    """Type-7 (linear interpolation) quantile."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptyInput('Cannot take a quantile of an empty sample.')
    if not 0.0 <= level <= 1.0:
        raise ValueError(f'Quantile level must lie in [0, 1], got {level}.')
    value = np.quantile(samples, level, axis=axis, method='linear')
    return float(value) if np.ndim(value) == 0 else value
