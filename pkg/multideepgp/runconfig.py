"""
Run configuration: loading, validation, hashing, and object construction.

A run configuration is a plain-text ``key=value`` file with dotted keys::

    # Case 1 at desk scale
    data.source=case1
    net.hidden_widths=100,100
    train.epochs=200
    bench.replicates=20

Sections are ``data``, ``case1``, ``case2``, ``survey``, ``basis``, ``net``,
``train``, ``predict``, ``kriging`` and ``bench``; every key is optional and
unknown keys are rejected. The config hash is the SHA-256 of the validated
document in canonical JSON form.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import dotenv_values
from rest_framework.exceptions import ValidationError

from . import __version__
from .baselines import KrigingConfig
from .datagen import (
    MIXED_OUTCOMES,
    SURVEY_OUTCOMES,
    Case1Config,
    Case2Config,
    Dataset,
    OutcomeSpec,
    SpatialEmbedding,
    SurveyConfig,
    build_embedding,
    read_csv_dataset,
    simulate_case1,
    simulate_case2,
    simulate_survey,
)
from .exceptions import ConfigError
from .network import NetworkConfig
from .numerics import RngStream
from .predict import PredictConfig
from .serializers import SECTION_SERIALIZERS
from .training import TrainConfig

logger = logging.getLogger(__name__)

MODEL_SECTIONS = ('basis', 'net')
# Settings that change how a run executes but never what it computes.
EXECUTION_KEYS = {'bench': ('workers',)}


@dataclass
class DataConfig:
    source: str = 'case1'
    path: str = ''
    outcomes: tuple[OutcomeSpec, ...] = MIXED_OUTCOMES
    coord_columns: tuple[str, ...] = ('x',)
    covariate_columns: tuple[str, ...] = ()
    train_frac: float = 0.8


@dataclass
class BasisConfig:
    kind: str = 'tps'
    grid: int = 25
    mask: str = 'none'


@dataclass
class NetSettings:
    hidden_widths: tuple[int, ...] = (100, 100)
    activation: str = 'relu'
    keep_prob: float = 0.9
    head_keep_prob: float | None = None


@dataclass
class BenchConfig:
    replicates: int = 100
    seed: int = 0
    methods: tuple[str, ...] = ('multideepgp', 'multidnn', 'kriging')
    workers: int = 1


@dataclass
class RunConfig:
    data: DataConfig
    case1: Case1Config
    case2: Case2Config
    survey: SurveyConfig
    basis: BasisConfig
    net: NetSettings
    train: TrainConfig
    predict: PredictConfig
    kriging: KrigingConfig
    bench: BenchConfig
    document: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        document = {section: dict(values) for section, values in self.document.items()}
        for section, keys in EXECUTION_KEYS.items():
            for key in keys:
                document.get(section, {}).pop(key, None)
        return canonical_hash(document)

    @property
    def model_hash(self) -> str:
        """Hash of the sections that define a fitted model's inputs and architecture."""
        schema = {
            'outcomes': [spec.to_dict() for spec in self.outcome_schema()],
            'coords': list(self.coord_columns()),
            'covariates': list(self.covariate_columns()),
        }
        return canonical_hash({'data': schema, **{name: self.document[name] for name in MODEL_SECTIONS}})

    def header(self) -> str:
        return f'multideepgp {__version__} config={self.config_hash}'

    def outcome_schema(self) -> tuple[OutcomeSpec, ...]:
        if self.data.source in ('case1', 'case2'):
            return MIXED_OUTCOMES
        if self.data.source == 'survey':
            return tuple(
                OutcomeSpec(spec.name, spec.kind, threshold=self.survey.vegetation_threshold)
                if spec.threshold is not None else spec
                for spec in SURVEY_OUTCOMES
            )
        return self.data.outcomes

    def coord_columns(self) -> tuple[str, ...]:
        return {
            'case1': ('x',),
            'case2': ('x', 'y'),
            'survey': ('lon', 'lat'),
        }.get(self.data.source, self.data.coord_columns)

    def covariate_columns(self) -> tuple[str, ...]:
        if self.data.source == 'survey':
            return ('rainfall',)
        if self.data.source == 'csv':
            return self.data.covariate_columns
        return ()

    def train_size(self):
        return {
            'case1': self.case1.train_count,
            'case2': self.case2.train_frac,
            'survey': self.survey.train_frac,
        }.get(self.data.source, self.data.train_frac)

    def load_dataset(self, rng: RngStream) -> Dataset:
        """Simulate (or read) the full dataset for one replicate."""
        if self.data.source == 'case1':
            return simulate_case1(self.case1, rng)
        if self.data.source == 'case2':
            return simulate_case2(self.case2, rng)
        if self.data.source == 'survey':
            return simulate_survey(self.survey, rng)
        return self.read_dataset(self.data.path)

    def read_dataset(self, path) -> Dataset:
        return read_csv_dataset(path, self.outcome_schema(), self.coord_columns(), self.covariate_columns())

    def embedding(self, coords) -> SpatialEmbedding:
        return build_embedding(self.basis.kind, self.basis.grid, self.basis.mask, coords)

    def network(self, input_dim: int, n_train: int, covariate_dim: int = 0) -> NetworkConfig:
        return NetworkConfig.build(
            input_dim=input_dim,
            heads=self.outcome_schema(),
            n_train=n_train,
            hidden_widths=self.net.hidden_widths,
            activation=self.net.activation,
            keep_prob=self.net.keep_prob,
            head_keep_prob=self.net.head_keep_prob,
            covariate_dim=covariate_dim,
        )


def canonical_hash(document: dict) -> str:
    text = json.dumps(document, sort_keys=True, separators=(',', ':'), ensure_ascii=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _nest(flat: dict) -> dict:
    nested: dict[str, dict] = {name: {} for name in SECTION_SERIALIZERS}
    errors = {}
    for key, value in flat.items():
        section, _, name = key.partition('.')
        if not name:
            errors[key] = ['Keys must have the form section.field.']
        elif section not in SECTION_SERIALIZERS:
            errors[key] = [f"Unknown section '{section}'."]
        else:
            nested[section][name] = value
    if errors:
        raise ConfigError(errors)
    return nested


def _plain(detail):
    if isinstance(detail, (list, tuple)):
        return [_plain(item) for item in detail]
    if isinstance(detail, dict):
        return {key: _plain(value) for key, value in detail.items()}
    return str(detail)


def validate_document(flat: dict) -> dict:
    """Validate a flat ``section.field -> str`` mapping into a canonical nested document."""
    document = {}
    errors = {}
    for section, values in _nest(flat).items():
        serializer = SECTION_SERIALIZERS[section](data=values)
        try:
            serializer.is_valid(raise_exception=True)
        except ValidationError as exc:
            errors.update({f'{section}.{key}': _plain(detail) for key, detail in exc.detail.items()})
            continue
        document[section] = dict(serializer.validated_data)
    if errors:
        raise ConfigError(errors)
    return document


def from_document(document: dict) -> RunConfig:
    data = dict(document['data'])
    data['outcomes'] = tuple(OutcomeSpec.from_dict(o) for o in data['outcomes'])
    data['coord_columns'] = tuple(data['coord_columns'])
    data['covariate_columns'] = tuple(data['covariate_columns'])

    survey = dict(document['survey'])
    survey['lon'] = (survey.pop('lon_min'), survey.pop('lon_max'))
    survey['lat'] = (survey.pop('lat_min'), survey.pop('lat_max'))

    net = dict(document['net'])
    net['hidden_widths'] = tuple(net['hidden_widths'])
    bench = dict(document['bench'])
    bench['methods'] = tuple(bench['methods'])

    return RunConfig(
        data=DataConfig(**data),
        case1=Case1Config(**document['case1']),
        case2=Case2Config(**document['case2']),
        survey=SurveyConfig(**survey),
        basis=BasisConfig(**document['basis']),
        net=NetSettings(**net),
        train=TrainConfig(**document['train']),
        predict=PredictConfig(**document['predict']),
        kriging=KrigingConfig(**document['kriging']),
        bench=BenchConfig(**bench),
        document=document,
    )


def read_flat(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'Config file {path} does not exist.')
    return dict(dotenv_values(path, interpolate=False))


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (defaults only when ``None``), apply ``overrides``, validate."""
    flat = read_flat(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = str(value)
    config = from_document(validate_document(flat))
    logger.debug('Loaded run config %s (hash %s)', path or '<defaults>', config.config_hash[:12])
    return config
