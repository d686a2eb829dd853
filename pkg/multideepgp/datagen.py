"""
Datasets, simulation designs and spatial basis construction.

Two simulation designs are provided: a one-dimensional stationary Gaussian
process driving binary, count and continuous outcomes (Case 1) and a
two-dimensional nonstationary surface driving the same three outcome types
(Case 2). A third generator produces a survey-style dataset with degree
coordinates, an exogenous covariate and missing cells, matching the schema
accepted by ``read_csv_dataset``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from scipy.spatial import Delaunay
from scipy.special import expit

from .exceptions import DimensionMismatch, EmptyInput, MalformedRow, TypeViolation
from .numerics import RngStream, as_locations, cholesky_with_jitter, distance_matrix, exp_cov, mvn_sample

logger = logging.getLogger(__name__)


class OutcomeKind(str, Enum):
    BINARY = 'binary'
    COUNT = 'count'
    CONTINUOUS = 'continuous'


CANONICAL_LINKS = {
    OutcomeKind.BINARY: 'logit',
    OutcomeKind.COUNT: 'log',
    OutcomeKind.CONTINUOUS: 'identity',
}


@dataclass(frozen=True)
class OutcomeSpec:
    name: str
    kind: OutcomeKind
    link: str = ''
    # Binarization cut-off applied on ingestion (binary outcomes only).
    threshold: float | None = None

    def __post_init__(self):
        kind = OutcomeKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        link = self.link or CANONICAL_LINKS[kind]
        if link != CANONICAL_LINKS[kind]:
            raise ValueError(
                f"Outcome '{self.name}' of kind {kind.value} must use the {CANONICAL_LINKS[kind]} link, not {link}."
            )
        object.__setattr__(self, 'link', link)
        if not self.name or not self.name.isidentifier():
            raise ValueError(f'Outcome name {self.name!r} is not a valid identifier.')
        if self.threshold is not None and kind is not OutcomeKind.BINARY:
            raise ValueError(f"Only binary outcomes take a threshold (outcome '{self.name}').")

    def inverse_link(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind is OutcomeKind.BINARY:
            return expit(eta)
        if self.kind is OutcomeKind.COUNT:
            return np.exp(eta)
        return eta

    def to_dict(self) -> dict:
        data = {'name': self.name, 'kind': self.kind.value}
        if self.threshold is not None:
            data['threshold'] = self.threshold
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'OutcomeSpec':
        return cls(name=data['name'], kind=OutcomeKind(data['kind']), threshold=data.get('threshold'))


MIXED_OUTCOMES = (
    OutcomeSpec('binary', OutcomeKind.BINARY),
    OutcomeSpec('count', OutcomeKind.COUNT),
    OutcomeSpec('continuous', OutcomeKind.CONTINUOUS),
)


def validate_cells(values: np.ndarray, spec: OutcomeSpec) -> None:
    observed = values[~np.isnan(values)]
    if spec.kind is OutcomeKind.BINARY and not np.all((observed == 0) | (observed == 1)):
        raise ValueError(f"Binary outcome '{spec.name}' has cells outside {{0, 1}}.")
    if spec.kind is OutcomeKind.COUNT and not np.all((observed >= 0) & (observed == np.floor(observed))):
        raise ValueError(f"Count outcome '{spec.name}' has negative or non-integer cells.")
    if not np.all(np.isfinite(observed)):
        raise ValueError(f"Outcome '{spec.name}' has non-finite cells.")


@dataclass
class Dataset:
    coords: np.ndarray
    outcomes: tuple[OutcomeSpec, ...]
    responses: np.ndarray
    features: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    coord_names: tuple[str, ...] = ()
    index: np.ndarray | None = None
    # Diagnostics only (true probabilities, latent field); never shown to models.
    truth: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.coords = as_locations(self.coords)
        self.outcomes = tuple(self.outcomes)
        self.responses = np.asarray(self.responses, dtype=float).reshape(len(self.coords), len(self.outcomes))
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=float).reshape(len(self.coords), -1)
            if not self.feature_names:
                self.feature_names = tuple(f'covariate{k + 1}' for k in range(self.features.shape[1]))
        if not self.coord_names:
            self.coord_names = ('x', 'y', 'z')[: self.coords.shape[1]]
        if self.index is None:
            self.index = np.arange(len(self.coords))
        self.validate()

    def validate(self) -> None:
        n = len(self.coords)
        if self.responses.shape != (n, len(self.outcomes)):
            raise DimensionMismatch('Response table does not match locations and outcomes.')
        if self.features is not None and len(self.features) != n:
            raise DimensionMismatch('Covariate rows do not match locations.')
        if len(self.coord_names) != self.coords.shape[1]:
            raise DimensionMismatch('Coordinate names do not match coordinate dimension.')
        for j, spec in enumerate(self.outcomes):
            validate_cells(self.responses[:, j], spec)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def covariate_dim(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    @property
    def outcome_names(self) -> list[str]:
        return [spec.name for spec in self.outcomes]

    def column(self, name: str) -> np.ndarray:
        return self.responses[:, self.outcome_names.index(name)]

    def subset(self, rows) -> 'Dataset':
        rows = np.asarray(rows, dtype=int)
        truth = {key: np.asarray(value)[rows] for key, value in self.truth.items()}
        return replace(
            self,
            coords=self.coords[rows],
            responses=self.responses[rows],
            features=None if self.features is None else self.features[rows],
            index=self.index[rows],
            truth=truth,
        )


@dataclass
class Case1Config:
    n: int = 1000
    mu: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.1
    tau2: float = 0.01
    c: float = 1.0
    kappa: float = 0.35
    alpha: float = -0.25
    beta: float = 0.60
    train_count: int = 800

    def validate(self) -> None:
        for name in ('sigma2', 'rho', 'tau2', 'kappa'):
            if getattr(self, name) <= 0:
                raise ValueError(f'Case 1 parameter {name} must be positive.')
        if not 0 < self.train_count < self.n:
            raise ValueError('Case 1 train_count must lie strictly between 0 and n.')


@dataclass
class Case2Config:
    n: int = 900
    alpha: float = 0.5
    beta: float = 3.0
    sigma2: float = 0.25
    train_frac: float = 0.8
    layout: str = 'uniform'

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError('Case 2 needs at least two locations.')
        if self.sigma2 <= 0:
            raise ValueError('Case 2 sigma2 must be positive.')
        if not 0 < self.train_frac < 1:
            raise ValueError('Case 2 train_frac must lie in (0, 1).')
        if self.layout not in ('uniform', 'grid'):
            raise ValueError(f'Unknown Case 2 layout {self.layout!r}.')


@dataclass
class SurveyConfig:
    n: int = 600
    lon: tuple[float, float] = (28.0, 36.0)
    lat: tuple[float, float] = (-5.0, 3.0)
    vegetation_threshold: float = 0.2
    water_sd: float = 0.25
    missing_frac: float = 0.05
    train_frac: float = 0.75

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError('Survey needs at least two locations.')
        if self.lon[0] >= self.lon[1] or self.lat[0] >= self.lat[1]:
            raise ValueError('Survey bounding box is empty.')
        if not 0 <= self.missing_frac < 1:
            raise ValueError('missing_frac must lie in [0, 1).')
        if not 0 < self.train_frac < 1:
            raise ValueError('Survey train_frac must lie in (0, 1).')


def simulate_case1(config: Case1Config, rng: RngStream) -> Dataset:
    config.validate()
    s = np.linspace(0.0, 1.0, config.n)
    cov = exp_cov(distance_matrix(s), config.sigma2, config.rho)
    lower = cholesky_with_jitter(cov)

    nu = mvn_sample(np.zeros(config.n), lower, rng.split('gp'))
    eps = math.sqrt(config.tau2) * rng.split('nugget').normal(config.n)
    z = config.mu + nu + eps

    prob = expit((z - config.c) / config.kappa)
    rate = np.exp(config.alpha + config.beta * z)
    responses = np.column_stack([
        rng.split('binary').bernoulli(prob),
        rng.split('count').poisson(rate),
        z,
    ])
    return Dataset(
        coords=s,
        outcomes=MIXED_OUTCOMES,
        responses=responses,
        truth={'latent': z, 'prob': prob, 'rate': rate},
    )


def case2_surface(sbar):
    shifted = np.asarray(sbar, dtype=float) - 0.9
    return np.sin(30.0 * shifted ** 4) * np.cos(2.0 * shifted) + shifted / 2.0


def simulate_case2(config: Case2Config, rng: RngStream) -> Dataset:
    config.validate()
    if config.layout == 'grid':
        side = math.ceil(math.sqrt(config.n))
        axis = np.linspace(0.0, 1.0, side)
        xx, yy = np.meshgrid(axis, axis, indexing='ij')
        coords = np.column_stack([xx.ravel(), yy.ravel()])[: config.n]
    else:
        coords = rng.split('locations').uniform((config.n, 2))

    eta = config.alpha + config.beta * case2_surface(coords.mean(axis=1))
    responses = np.column_stack([
        rng.split('binary').bernoulli(expit(eta)),
        rng.split('count').poisson(np.exp(eta)),
        eta + math.sqrt(config.sigma2) * rng.split('noise').normal(config.n),
    ])
    return Dataset(coords=coords, outcomes=MIXED_OUTCOMES, responses=responses, truth={'eta': eta})


SURVEY_OUTCOMES = (
    OutcomeSpec('vegetation', OutcomeKind.BINARY, threshold=0.2),
    OutcomeSpec('malaria', OutcomeKind.COUNT),
    OutcomeSpec('water', OutcomeKind.CONTINUOUS),
)


def _survey_latent(u: np.ndarray) -> np.ndarray:
    def bump(center, width):
        return np.exp(-np.sum((u - np.asarray(center)) ** 2, axis=1) / width)

    return bump((0.3, 0.6), 0.05) + 0.8 * bump((0.7, 0.3), 0.08) - 0.6 * bump((0.6, 0.8), 0.04) - 0.3


def simulate_survey(config: SurveyConfig, rng: RngStream) -> Dataset:
    """Survey-style sample inside an elliptical study area with a rainfall covariate."""
    config.validate()
    draws = rng.split('locations')
    accepted: list[np.ndarray] = []
    count = 0
    while count < config.n:
        candidates = draws.uniform((2 * config.n, 2))
        inside = np.sum((candidates - 0.5) ** 2 / 0.25, axis=1) <= 1.0
        accepted.append(candidates[inside])
        count += int(inside.sum())
    u = np.concatenate(accepted)[: config.n]

    lon = config.lon[0] + u[:, 0] * (config.lon[1] - config.lon[0])
    lat = config.lat[0] + u[:, 1] * (config.lat[1] - config.lat[0])
    g = _survey_latent(u)
    rainfall = 1.0 + 0.8 * u[:, 0] + 0.3 * np.sin(3.0 * np.pi * u[:, 1]) + 0.1 * rng.split('rainfall').normal(config.n)
    centered_rain = rainfall - 1.4

    index = 0.2 + 0.25 * g + 0.1 * centered_rain + 0.05 * rng.split('vegetation').normal(config.n)
    vegetation = (index >= config.vegetation_threshold).astype(float)
    malaria = rng.split('malaria').poisson(np.exp(0.5 + 0.8 * g + 0.3 * centered_rain))
    water = 1.0 + g + 0.4 * centered_rain + config.water_sd * rng.split('water').normal(config.n)

    responses = np.column_stack([vegetation, malaria, water])
    if config.missing_frac > 0:
        holes = rng.split('missing').uniform(responses.shape) < config.missing_frac
        responses[holes] = np.nan

    outcomes = tuple(
        replace(spec, threshold=config.vegetation_threshold) if spec.threshold is not None else spec
        for spec in SURVEY_OUTCOMES
    )
    return Dataset(
        coords=np.column_stack([lon, lat]),
        outcomes=outcomes,
        responses=responses,
        features=rainfall[:, None],
        feature_names=('rainfall',),
        coord_names=('lon', 'lat'),
        truth={'latent': g, 'vegetation_index': index},
    )


def resolve_train_size(n: int, train_count_or_frac) -> int:
    """Integers are counts; floats in (0, 1) are fractions rounded half up."""
    if isinstance(train_count_or_frac, float) and 0 < train_count_or_frac < 1:
        size = int(math.floor(train_count_or_frac * n + 0.5))
    else:
        size = int(train_count_or_frac)
    if not 0 < size < n:
        raise ValueError(f'Training size {size} is out of range for {n} locations.')
    return size


def split(data: Dataset, train_count_or_frac, rng: RngStream) -> tuple[Dataset, Dataset]:
    size = resolve_train_size(data.n, train_count_or_frac)
    order = rng.permutation(data.n)
    return data.subset(np.sort(order[:size])), data.subset(np.sort(order[size:]))


@dataclass
class KnotSet:
    knots: np.ndarray
    grid: tuple[int, ...]
    bbox: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.knots)

    def to_dict(self) -> dict:
        return {'knots': self.knots.tolist(), 'grid': list(self.grid), 'bbox': [list(b) for b in self.bbox]}

    @classmethod
    def from_dict(cls, data: dict) -> 'KnotSet':
        return cls(
            knots=np.asarray(data['knots'], dtype=float),
            grid=tuple(data['grid']),
            bbox=tuple(tuple(b) for b in data['bbox']),
        )

    def to_csv(self, path) -> None:
        names = ['x', 'y', 'z'][: self.knots.shape[1]]
        frame = pd.DataFrame(self.knots, columns=names)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(f"# knot lattice grid={'x'.join(map(str, self.grid))}\n")
            frame.to_csv(fh, index=False, lineterminator='\n')


def knot_lattice(bbox, grid, mask: Callable[[np.ndarray], bool] | None = None) -> KnotSet:
    bbox = tuple((float(lo), float(hi)) for lo, hi in bbox)
    grid = tuple(int(g) for g in grid)
    if len(bbox) != len(grid):
        raise DimensionMismatch('Bounding box and grid have different dimensions.')
    if any(g < 2 for g in grid):
        raise ValueError('Knot lattice needs at least two knots per axis.')

    axes = [np.linspace(lo, hi, g) for (lo, hi), g in zip(bbox, grid)]
    mesh = np.meshgrid(*axes, indexing='ij')
    knots = np.column_stack([m.ravel() for m in mesh])
    if mask is not None:
        knots = knots[np.array([bool(mask(k)) for k in knots], dtype=bool)]
    if len(knots) == 0:
        raise EmptyInput('No knots survive the mask.')
    return KnotSet(knots=knots, grid=grid, bbox=bbox)


def hull_mask(coords) -> Callable[[np.ndarray], bool]:
    """Predicate accepting points inside the convex hull of ``coords``."""
    coords = as_locations(coords)
    if coords.shape[1] == 1:
        lo, hi = coords.min(), coords.max()
        return lambda point: lo <= point[0] <= hi
    hull = Delaunay(coords)
    return lambda point: bool(hull.find_simplex(np.atleast_2d(point))[0] >= 0)


def tps_features(locations, knots: KnotSet) -> np.ndarray:
    r = distance_matrix(locations, knots.knots)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, r * r * np.log(safe), 0.0)


@dataclass
class SpatialEmbedding:
    """Maps locations to network inputs: raw coordinates or TPS bases."""

    kind: str = 'coords'
    knots: KnotSet | None = None

    def __post_init__(self):
        if self.kind not in ('coords', 'tps'):
            raise ValueError(f'Unknown spatial embedding {self.kind!r}.')
        if self.kind == 'tps' and self.knots is None:
            raise ValueError('A TPS embedding needs a knot set.')

    def transform(self, coords) -> np.ndarray:
        if self.kind == 'tps':
            return tps_features(coords, self.knots)
        return as_locations(coords)

    def output_dim(self, coord_dim: int) -> int:
        return len(self.knots) if self.kind == 'tps' else coord_dim

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'knots': None if self.knots is None else self.knots.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> 'SpatialEmbedding':
        knots = data.get('knots')
        return cls(kind=data['kind'], knots=None if knots is None else KnotSet.from_dict(knots))


def build_embedding(kind: str, grid: int, mask: str, coords) -> SpatialEmbedding:
    """Embedding whose knot lattice spans the bounding box of ``coords``."""
    if kind == 'coords':
        return SpatialEmbedding('coords')
    coords = as_locations(coords)
    bbox = [(coords[:, k].min(), coords[:, k].max()) for k in range(coords.shape[1])]
    predicate = hull_mask(coords) if mask == 'hull' else None
    knots = knot_lattice(bbox, [grid] * coords.shape[1], predicate)
    logger.info('TPS embedding with %d of %d lattice knots', len(knots), grid ** coords.shape[1])
    return SpatialEmbedding('tps', knots)


def _parse_number(raw: str, line: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise TypeViolation(line, column, raw) from None
    if not math.isfinite(value):
        raise TypeViolation(line, column, raw)
    return value


def _parse_cell(raw: str, spec: OutcomeSpec, line: int) -> float:
    raw = raw.strip()
    if raw == '':
        return math.nan
    value = _parse_number(raw, line, spec.name)
    if spec.kind is OutcomeKind.BINARY:
        if spec.threshold is not None:
            return 1.0 if value >= spec.threshold else 0.0
        if value not in (0.0, 1.0):
            raise TypeViolation(line, spec.name, raw)
    elif spec.kind is OutcomeKind.COUNT and (value < 0 or value != math.floor(value)):
        raise TypeViolation(line, spec.name, raw)
    return value


def read_csv_dataset(
    path,
    schema: Sequence[OutcomeSpec],
    coord_columns: Sequence[str],
    covariate_columns: Sequence[str] = (),
) -> Dataset:
    """Read a header-first UTF-8 CSV; ``#`` lines before the header are ignored."""
    schema = tuple(schema)
    coords, covariates, responses = [], [], []
    with open(path, encoding='utf-8', newline='') as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            line = reader.line_num
            if header is None:
                if not row or row[0].startswith('#'):
                    continue
                header = [name.strip() for name in row]
                wanted = [*coord_columns, *covariate_columns, *(spec.name for spec in schema)]
                missing = [name for name in wanted if name not in header]
                if missing:
                    raise MalformedRow(line, f"missing columns {', '.join(missing)}")
                positions = {name: header.index(name) for name in wanted}
                continue
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(line, f'expected {len(header)} fields, found {len(row)}')
            coords.append([_parse_number(row[positions[c]], line, c) for c in coord_columns])
            covariates.append([_parse_number(row[positions[c]], line, c) for c in covariate_columns])
            responses.append([_parse_cell(row[positions[spec.name]], spec, line) for spec in schema])

    if header is None:
        raise MalformedRow(1, 'no header row')
    if not coords:
        raise EmptyInput(f'{path} contains no data rows.')
    return Dataset(
        coords=np.asarray(coords),
        outcomes=schema,
        responses=np.asarray(responses),
        features=np.asarray(covariates) if covariate_columns else None,
        feature_names=tuple(covariate_columns),
        coord_names=tuple(coord_columns),
    )


def write_dataset_csv(data: Dataset, path, header_comment: str | None = None) -> None:
    frame = pd.DataFrame(data.coords, columns=list(data.coord_names))
    if data.features is not None:
        for k, name in enumerate(data.feature_names):
            frame[name] = data.features[:, k]
    for j, spec in enumerate(data.outcomes):
        frame[spec.name] = data.responses[:, j]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        if header_comment:
            fh.write(f'# {header_comment}\n')
        frame.to_csv(fh, index=False, na_rep='', lineterminator='\n')
