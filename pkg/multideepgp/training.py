"""Dropout training loop: one fresh node mask per minibatch, Adam or SGD updates."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .datagen import Dataset, SpatialEmbedding
from .exceptions import DimensionMismatch, DivergenceError
from .network import (
    Batch,
    FittedModel,
    NetworkConfig,
    Params,
    Standardizer,
    estimate_sigma2,
    loss_and_grad,
    sample_masks,
)
from .numerics import RngStream

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = 'adam'
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    gradient_clip: float | None = 5.0
    per_row_masks: bool = False
    patience: int | None = None
    min_delta: float = 0.0

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError('epochs must be non-negative and batch_size positive.')
        if self.learning_rate <= 0:
            raise ValueError('learning_rate must be positive.')
        if self.optimizer not in ('adam', 'sgd'):
            raise ValueError(f'Unknown optimizer {self.optimizer!r}.')
        if self.gradient_clip is not None and self.gradient_clip <= 0:
            raise ValueError('gradient_clip must be positive when set.')
        if self.patience is not None and self.patience < 1:
            raise ValueError('patience must be positive when set.')


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    final_loss: float = math.nan
    seconds: float = 0.0
    steps: int = 0
    learning_rate: float = math.nan
    stopped_early: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'epoch': np.arange(1, len(self.losses) + 1), 'loss': self.losses})

    def to_csv(self, path, header_comment: str | None = None) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            if header_comment:
                fh.write(f'# {header_comment}\n')
            self.to_frame().to_csv(fh, index=False, lineterminator='\n')


def init_params(config: NetworkConfig, rng: RngStream) -> Params:
    """He-normal hidden weights (Xavier for tanh/identity), unit-gain heads, zero biases."""
    gain = 2.0 if config.hidden_activation == 'relu' else 1.0
    params = Params.zeros(config)
    for layer, (rows, fan_in) in enumerate(config.layer_shapes):
        sd = math.sqrt(gain / fan_in)
        params.weights[layer] = sd * rng.split('layer', layer).normal((rows, fan_in))
    sd = math.sqrt(1.0 / config.head_input_dim)
    params.head_weights = sd * rng.split('heads').normal(params.head_weights.shape)
    return params


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (lr / bc1) * m / (np.sqrt(v / bc2) + self.epsilon)


class SGD:
    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(params, grads):
            p -= lr * g


def clip_gradients(grads: list[np.ndarray], max_norm: float | None) -> list[np.ndarray]:
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm <= max_norm:
        return grads
    return [g * (max_norm / norm) for g in grads]


def make_optimizer(tcfg: TrainConfig):
    if tcfg.optimizer == 'sgd':
        return SGD()
    return Adam(tcfg.beta1, tcfg.beta2, tcfg.epsilon)


def prepare(train: Dataset, embedding: SpatialEmbedding) -> tuple[Batch, Standardizer, Standardizer | None]:
    raw = embedding.transform(train.coords)
    input_scaler = Standardizer.fit(raw)
    cov_scaler = Standardizer.fit(train.features) if train.features is not None else None
    batch = Batch(
        inputs=input_scaler.transform(raw),
        responses=train.responses,
        covariates=None if cov_scaler is None else cov_scaler.transform(train.features),
    )
    return batch, input_scaler, cov_scaler


def check_compatible(train: Dataset, net: NetworkConfig, batch: Batch) -> None:
    if batch.inputs.shape[1] != net.input_dim:
        raise DimensionMismatch(f'Embedding yields {batch.inputs.shape[1]} inputs; network expects {net.input_dim}.')
    if train.covariate_dim != net.covariate_dim:
        raise DimensionMismatch(f'Dataset has {train.covariate_dim} covariates; network expects {net.covariate_dim}.')
    if [h.name for h in net.heads] != train.outcome_names:
        raise DimensionMismatch('Network heads do not match the dataset outcomes.')


def fit(
    train: Dataset,
    net: NetworkConfig,
    tcfg: TrainConfig,
    embedding: SpatialEmbedding | None = None,
    rng: RngStream | None = None,
    model_hash: str = '',
) -> tuple[FittedModel, TrainReport]:
    tcfg.validate()
    if train.n == 0:
        raise ValueError('Cannot train on an empty dataset.')
    embedding = embedding or SpatialEmbedding('coords')
    batch, input_scaler, cov_scaler = prepare(train, embedding)
    check_compatible(train, net, batch)
    if net.n_train != train.n:
        logger.debug('Setting n_train to %d (was %d)', train.n, net.n_train)
        net = replace(net, n_train=train.n)

    rng = rng or RngStream(tcfg.seed)
    params = init_params(net, rng.split('init'))
    shuffle_rng = rng.split('shuffle')
    mask_rng = rng.split('masks')
    optimizer = make_optimizer(tcfg)
    lr = tcfg.learning_rate
    halved = False
    report = TrainReport()
    best, stale = math.inf, 0
    started = time.perf_counter()

    for epoch in range(tcfg.epochs):
        order = shuffle_rng.permutation(train.n)
        batch_losses = []
        for start in range(0, train.n, tcfg.batch_size):
            rows = order[start:start + tcfg.batch_size]
            masks = sample_masks(net, mask_rng, rows=len(rows) if tcfg.per_row_masks else None)
            try:
                value, gradient = loss_and_grad(params, masks, batch.rows(rows), net)
                grads = gradient.arrays()
                if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                    raise DivergenceError(f'Non-finite loss {value} at epoch {epoch + 1}.')
            except DivergenceError as exc:
                if halved:
                    raise DivergenceError(f'Training diverged after halving the learning rate: {exc}') from exc
                halved = True
                lr /= 2.0
                logger.warning('%s Halving the learning rate to %.3g and skipping the step.', exc, lr)
                continue
            optimizer.step(params.arrays(), clip_gradients(grads, tcfg.gradient_clip), lr)
            batch_losses.append(value)
            report.steps += 1

        epoch_loss = float(np.mean(batch_losses)) if batch_losses else math.nan
        report.losses.append(epoch_loss)
        logger.debug('epoch %d loss %.6f', epoch + 1, epoch_loss)
        if tcfg.patience is not None:
            if epoch_loss < best - tcfg.min_delta:
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= tcfg.patience:
                    report.stopped_early = True
                    logger.info('Early stop after %d epochs without improvement', stale)
                    break

    report.seconds = time.perf_counter() - started
    report.final_loss = report.losses[-1] if report.losses else math.nan
    report.learning_rate = lr
    sigma2 = estimate_sigma2(params, net, batch)
    logger.info(
        'Trained %d epochs (%d steps) in %.2fs, final loss %.4f',
        len(report.losses), report.steps, report.seconds, report.final_loss,
    )
    model = FittedModel(
        config=net,
        params=params,
        embedding=embedding,
        input_scaler=input_scaler,
        covariate_scaler=cov_scaler,
        sigma2=sigma2,
        model_hash=model_hash,
    )
    return model, report
