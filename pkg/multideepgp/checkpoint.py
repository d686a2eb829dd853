"""
Checkpoint format for fitted models.

A checkpoint is a NumPy ``.npz`` archive. The ``metadata`` entry holds a JSON
document (format version, network configuration, spatial embedding, residual
variances, model hash); tensors are stored as ``param_000``, ``param_001``, ...
in declared order (``W1, b1, ..., head weights, head biases``) next to the
input and covariate standardization statistics. Arrays are written in float64,
so a save/load cycle is bit-exact.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .datagen import SpatialEmbedding
from .exceptions import CheckpointError
from .network import FittedModel, NetworkConfig, Params, Standardizer

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _metadata(model: FittedModel) -> dict:
    return {
        'format_version': FORMAT_VERSION,
        'network': model.config.to_dict(),
        'embedding': model.embedding.to_dict(),
        'sigma2': dict(sorted(model.sigma2.items())),
        'model_hash': model.model_hash,
        'n_params': len(model.params.arrays()),
        'has_covariate_scaler': model.covariate_scaler is not None,
    }


def save_checkpoint(model: FittedModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.params.check(model.config)
    arrays = {
        f'param_{i:03d}': np.ascontiguousarray(a, dtype=np.float64)
        for i, a in enumerate(model.params.arrays())
    }
    arrays['input_mean'] = model.input_scaler.mean
    arrays['input_scale'] = model.input_scaler.scale
    if model.covariate_scaler is not None:
        arrays['covariate_mean'] = model.covariate_scaler.mean
        arrays['covariate_scale'] = model.covariate_scaler.scale
    metadata = json.dumps(_metadata(model), sort_keys=True)
    with open(path, 'wb') as fh:
        np.savez(fh, metadata=np.array(metadata), **arrays)
    logger.info('Wrote checkpoint %s (%d tensors)', path, len(model.params.arrays()))
    return path


def load_checkpoint(path) -> FittedModel:
    path = Path(path)
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f'Cannot read checkpoint {path}: {exc}') from exc

    with archive:
        if 'metadata' not in archive.files:
            raise CheckpointError(f'{path} has no metadata record.')
        meta = json.loads(str(archive['metadata']))
        if meta.get('format_version') != FORMAT_VERSION:
            raise CheckpointError(
                f"Unsupported checkpoint format {meta.get('format_version')!r}; expected {FORMAT_VERSION}."
            )
        config = NetworkConfig.from_dict(meta['network'])
        params = Params.from_arrays([archive[f'param_{i:03d}'] for i in range(meta['n_params'])])
        params.check(config)
        input_scaler = Standardizer(mean=archive['input_mean'], scale=archive['input_scale'])
        covariate_scaler = None
        if meta['has_covariate_scaler']:
            covariate_scaler = Standardizer(mean=archive['covariate_mean'], scale=archive['covariate_scale'])

    return FittedModel(
        config=config,
        params=params,
        embedding=SpatialEmbedding.from_dict(meta['embedding']),
        input_scaler=input_scaler,
        covariate_scaler=covariate_scaler,
        sigma2={name: float(value) for name, value in meta['sigma2'].items()},
        model_hash=meta['model_hash'],
    )
