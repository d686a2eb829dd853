"""Small fixtures shared by the test modules."""
from pathlib import Path

import numpy as np

from multideepgp.datagen import MIXED_OUTCOMES, Dataset, SpatialEmbedding
from multideepgp.network import FittedModel, NetworkConfig, Params, Standardizer
from multideepgp.numerics import RngStream
from multideepgp.training import init_params

# Desk-scale Case 1 run: seconds per replicate.
SMALL_CASE1 = {
    'data.source': 'case1',
    'case1.n': '60',
    'case1.train_count': '48',
    'basis.grid': '5',
    'net.hidden_widths': '8',
    'train.epochs': '2',
    'train.batch_size': '16',
    'predict.m_draws': '4',
    'predict.y_sample_per_draw': '5',
    'bench.replicates': '2',
    'bench.seed': '11',
}

SMALL_CASE2 = {
    **SMALL_CASE1,
    'data.source': 'case2',
    'case2.n': '64',
    'case2.train_frac': '0.75',
    'basis.grid': '4',
}


def write_config(directory, values: dict, name: str = 'run.env') -> Path:
    path = Path(directory) / name
    lines = ['# test configuration'] + [f'{key}={value}' for key, value in values.items()]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def write_text(directory, name: str, text: str) -> Path:
    path = Path(directory) / name
    path.write_text(text, encoding='utf-8')
    return path


def toy_model(
    heads=MIXED_OUTCOMES, hidden_widths=(4,), keep_prob=1.0, input_dim=1, seed=None, sigma2=None, head_keep_prob=None
):
    """Coordinate-embedded model with zero (or seeded random) parameters and identity scaling."""
    config = NetworkConfig.build(
        input_dim=input_dim, heads=heads, n_train=10, hidden_widths=hidden_widths, keep_prob=keep_prob,
        head_keep_prob=head_keep_prob,
    )
    params = Params.zeros(config) if seed is None else init_params(config, RngStream(seed))
    return FittedModel(
        config=config,
        params=params,
        embedding=SpatialEmbedding('coords'),
        input_scaler=Standardizer(mean=np.zeros(input_dim), scale=np.ones(input_dim)),
        sigma2=sigma2 or {},
    )


def mixed_dataset(n: int, seed: int = 0, dim: int = 1) -> Dataset:
    """Smooth mixed-outcome field on [0, 1]^dim."""
    rng = RngStream(seed)
    coords = rng.split('coords').uniform((n, dim))
    signal = np.sin(2.0 * np.pi * coords.sum(axis=1))
    responses = np.column_stack([
        rng.split('binary').bernoulli(1.0 / (1.0 + np.exp(-2.0 * signal))),
        rng.split('count').poisson(np.exp(0.5 + signal)),
        signal + 0.1 * rng.split('noise').normal(n),
    ])
    return Dataset(coords=coords, outcomes=MIXED_OUTCOMES, responses=responses)
