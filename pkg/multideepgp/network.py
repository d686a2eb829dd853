"""
MultiDeepGP network core.

Shared hidden layers with Bernoulli node masks feed one linear head per
outcome. Heads emit the linear predictor on the link scale; inverse links are
applied once, in the likelihood and prediction code. ``keep_prob`` is always
the probability that a unit is retained, and it sets the weight-decay
constant ``keep_prob / (2 N)`` of each layer and head.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import expit, gammaln

from .datagen import OutcomeKind, OutcomeSpec, SpatialEmbedding
from .exceptions import DegenerateSample, DimensionMismatch, DivergenceError
from .numerics import RngStream

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _relu(f):
    return np.maximum(f, 0.0)


def _relu_grad(f):
    return (f > 0).astype(float)


def _tanh_grad(f):
    return 1.0 - np.tanh(f) ** 2


ACTIVATIONS = {
    'relu': (_relu, _relu_grad),
    'tanh': (np.tanh, _tanh_grad),
    'identity': (lambda f: f, np.ones_like),
}


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_widths: tuple[int, ...]
    hidden_activation: str
    keep_probs: tuple[float, ...]
    head_keep_probs: tuple[float, ...]
    heads: tuple[OutcomeSpec, ...]
    n_train: int
    covariate_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'hidden_widths', tuple(int(w) for w in self.hidden_widths))
        object.__setattr__(self, 'keep_probs', tuple(float(p) for p in self.keep_probs))
        object.__setattr__(self, 'head_keep_probs', tuple(float(p) for p in self.head_keep_probs))
        object.__setattr__(self, 'heads', tuple(self.heads))
        self.validate()

    @classmethod
    def build(
        cls,
        input_dim: int,
        heads: Sequence[OutcomeSpec],
        n_train: int,
        hidden_widths: Sequence[int] = (100, 100),
        activation: str = 'relu',
        keep_prob: float = 0.9,
        head_keep_prob: float | None = None,
        covariate_dim: int = 0,
    ) -> 'NetworkConfig':
        head_keep_prob = keep_prob if head_keep_prob is None else head_keep_prob
        return cls(
            input_dim=input_dim,
            hidden_widths=tuple(hidden_widths),
            hidden_activation=activation,
            keep_probs=(keep_prob,) * len(hidden_widths),
            head_keep_probs=(head_keep_prob,) * len(heads),
            heads=tuple(heads),
            n_train=n_train,
            covariate_dim=covariate_dim,
        )

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ValueError('input_dim must be positive.')
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError('Hidden widths must be positive.')
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f'Unknown activation {self.hidden_activation!r}.')
        if len(self.keep_probs) != len(self.hidden_widths):
            raise ValueError('Need one keep probability per hidden layer.')
        if not self.heads:
            raise ValueError('Need at least one outcome head.')
        if len(self.head_keep_probs) != len(self.heads):
            raise ValueError('Need one keep probability per head.')
        if any(not 0 < p <= 1 for p in (*self.keep_probs, *self.head_keep_probs)):
            raise ValueError('Keep probabilities must lie in (0, 1].')
        if self.n_train < 1:
            raise ValueError('n_train must be at least 1.')
        if self.covariate_dim < 0:
            raise ValueError('covariate_dim cannot be negative.')

    @property
    def representation_dim(self) -> int:
        return self.hidden_widths[-1] if self.hidden_widths else self.input_dim

    @property
    def head_input_dim(self) -> int:
        return self.representation_dim + self.covariate_dim

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_widths]
        return [(dims[i + 1], dims[i]) for i in range(len(self.hidden_widths))]

    def layer_lambdas(self) -> list[float]:
        return [p / (2.0 * self.n_train) for p in self.keep_probs]

    def head_lambdas(self) -> np.ndarray:
        return np.asarray(self.head_keep_probs) / (2.0 * self.n_train)

    def to_dict(self) -> dict:
        return {
            'input_dim': self.input_dim,
            'hidden_widths': list(self.hidden_widths),
            'hidden_activation': self.hidden_activation,
            'keep_probs': list(self.keep_probs),
            'head_keep_probs': list(self.head_keep_probs),
            'heads': [spec.to_dict() for spec in self.heads],
            'n_train': self.n_train,
            'covariate_dim': self.covariate_dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NetworkConfig':
        data = dict(data)
        data['heads'] = tuple(OutcomeSpec.from_dict(h) for h in data['heads'])
        return cls(**data)


@dataclass
class Params:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head_weights: np.ndarray
    head_biases: np.ndarray

    @classmethod
    def zeros(cls, config: NetworkConfig) -> 'Params':
        return cls(
            weights=[np.zeros(shape) for shape in config.layer_shapes],
            biases=[np.zeros(shape[0]) for shape in config.layer_shapes],
            head_weights=np.zeros((len(config.heads), config.head_input_dim)),
            head_biases=np.zeros(len(config.heads)),
        )

    def arrays(self) -> list[np.ndarray]:
        """All tensors in declared order: W1, b1, ..., head weights, head biases."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        out.extend((self.head_weights, self.head_biases))
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> 'Params':
        arrays = list(arrays)
        layers = (len(arrays) - 2) // 2
        return cls(
            weights=[np.asarray(arrays[2 * i], dtype=float) for i in range(layers)],
            biases=[np.asarray(arrays[2 * i + 1], dtype=float) for i in range(layers)],
            head_weights=np.asarray(arrays[-2], dtype=float),
            head_biases=np.asarray(arrays[-1], dtype=float),
        )

    def copy(self) -> 'Params':
        return Params.from_arrays([a.copy() for a in self.arrays()])

    def check(self, config: NetworkConfig) -> None:
        expected = Params.zeros(config).arrays()
        for got, want in zip(self.arrays(), expected):
            if got.shape != want.shape:
                raise DimensionMismatch(f'Parameter of shape {got.shape} where {want.shape} is expected.')
        if len(self.arrays()) != len(expected):
            raise DimensionMismatch('Parameter count does not match the network configuration.')
        if not all(np.all(np.isfinite(a)) for a in self.arrays()):
            raise ValueError('Parameters must be finite.')

    def apply_masks(self, masks: 'MaskSet') -> 'Params':
        """Zero the weight rows and biases of dropped units (shared masks only)."""
        if masks.heads.ndim != 2:
            raise DimensionMismatch('Per-row masks cannot be folded into a single parameter set.')
        k = masks.heads.shape[1]
        head_weights = self.head_weights.copy()
        head_weights[:, :k] *= masks.heads
        return Params(
            weights=[w * r[:, None] for w, r in zip(self.weights, masks.hidden)],
            biases=[b * r for b, r in zip(self.biases, masks.hidden)],
            head_weights=head_weights,
            head_biases=self.head_biases.copy(),
        )


@dataclass
class MaskSet:
    """Hidden masks of shape ``(k,)`` or ``(rows, k)``; head masks ``(J, k)`` or ``(rows, J, k)``."""

    hidden: list[np.ndarray]
    heads: np.ndarray

    @classmethod
    def ones(cls, config: NetworkConfig) -> 'MaskSet':
        return cls(
            hidden=[np.ones(w) for w in config.hidden_widths],
            heads=np.ones((len(config.heads), config.representation_dim)),
        )

    @classmethod
    def expected(cls, config: NetworkConfig) -> 'MaskSet':
        """Keep probabilities in place of 0/1 entries: the rescaled deterministic pass."""
        return cls(
            hidden=[np.full(w, p) for w, p in zip(config.hidden_widths, config.keep_probs)],
            heads=np.repeat(np.asarray(config.head_keep_probs)[:, None], config.representation_dim, axis=1),
        )


def sample_masks(config: NetworkConfig, rng: RngStream, rows: int | None = None) -> MaskSet:
    lead = () if rows is None else (rows,)
    hidden = [
        rng.bernoulli(np.full((*lead, w), p)) for w, p in zip(config.hidden_widths, config.keep_probs)
    ]
    head_probs = np.broadcast_to(
        np.asarray(config.head_keep_probs)[:, None], (*lead, len(config.heads), config.representation_dim)
    )
    return MaskSet(hidden=hidden, heads=rng.bernoulli(head_probs))


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    covariates: np.ndarray | None
    pre: list[np.ndarray]
    post: list[np.ndarray]
    eta: np.ndarray

    @property
    def representation(self) -> np.ndarray:
        return self.post[-1] if self.post else self.inputs


@dataclass
class Batch:
    inputs: np.ndarray
    responses: np.ndarray
    covariates: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.inputs)

    def rows(self, index) -> 'Batch':
        return Batch(
            inputs=self.inputs[index],
            responses=self.responses[index],
            covariates=None if self.covariates is None else self.covariates[index],
        )


def _as_rows(values, width: int, what: str) -> np.ndarray:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != width:
        raise DimensionMismatch(f'{what} has {values.shape[1]} columns, expected {width}.')
    return values


def forward(
    params: Params,
    masks: MaskSet,
    inputs,
    config: NetworkConfig,
    covariates=None,
) -> ForwardTrace:
    """Masked forward pass; a 1-D ``inputs`` is a single location."""
    x = _as_rows(inputs, config.input_dim, 'Input')
    cov = None
    if config.covariate_dim:
        if covariates is None:
            raise DimensionMismatch('This network expects covariates.')
        cov = _as_rows(covariates, config.covariate_dim, 'Covariates')
        if len(cov) != len(x):
            raise DimensionMismatch('Covariate rows do not match input rows.')

    act, _ = ACTIVATIONS[config.hidden_activation]
    pre, post = [], []
    a = x
    for w, b, r in zip(params.weights, params.biases, masks.hidden):
        f = a @ w.T + b
        a = act(f) * r
        pre.append(f)
        post.append(a)

    k = config.representation_dim
    head_w = params.head_weights[:, :k]
    if masks.heads.ndim == 2:
        eta = a @ (head_w * masks.heads).T
    else:
        eta = np.einsum('bk,bjk,jk->bj', a, masks.heads, head_w)
    if cov is not None:
        eta = eta + cov @ params.head_weights[:, k:].T
    eta = eta + params.head_biases

    if not np.all(np.isfinite(eta)) or not all(np.all(np.isfinite(p)) for p in post):
        raise DivergenceError('Non-finite activation in forward pass.')
    return ForwardTrace(inputs=x, covariates=cov, pre=pre, post=post, eta=eta)


def nll_cells(eta, y, specs: Sequence[OutcomeSpec], sigma2: dict | None = None):
    """Per-cell negative log-likelihood and its derivative in eta; missing cells give 0."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if eta.shape != y.shape or eta.shape[1] != len(specs):
        raise DimensionMismatch('Predictor, response and outcome shapes disagree.')
    sigma2 = sigma2 or {}
    observed = ~np.isnan(y)
    y0 = np.where(observed, y, 0.0)
    terms = np.zeros_like(eta)
    d_eta = np.zeros_like(eta)

    for j, spec in enumerate(specs):
        e, t = eta[:, j], y0[:, j]
        if spec.kind is OutcomeKind.BINARY:
            terms[:, j] = np.logaddexp(0.0, e) - t * e
            d_eta[:, j] = expit(e) - t
        elif spec.kind is OutcomeKind.COUNT:
            if np.any(t < 0) or np.any(t != np.floor(t)):
                raise ValueError(f"Count outcome '{spec.name}' has negative or non-integer responses.")
            rate = np.exp(e)
            terms[:, j] = rate - t * e + gammaln(t + 1.0)
            d_eta[:, j] = rate - t
        else:
            s2 = float(sigma2.get(spec.name, 1.0))
            terms[:, j] = (t - e) ** 2 / (2.0 * s2) + HALF_LOG_2PI + 0.5 * math.log(s2)
            d_eta[:, j] = (e - t) / s2

    terms[~observed] = 0.0
    d_eta[~observed] = 0.0
    return terms, d_eta


def nll(eta, y, specs: Sequence[OutcomeSpec], sigma2: dict | None = None) -> float:
    terms, _ = nll_cells(eta, y, specs, sigma2)
    return float(terms.sum())


def penalty(params: Params, config: NetworkConfig) -> float:
    total = 0.0
    for lam, w, b in zip(config.layer_lambdas(), params.weights, params.biases):
        total += lam * (np.sum(w * w) + np.sum(b * b))
    head_sq = np.sum(params.head_weights ** 2, axis=1) + params.head_biases ** 2
    return float(total + np.sum(config.head_lambdas() * head_sq))


def loss_and_grad(params: Params, masks: MaskSet, batch: Batch, config: NetworkConfig) -> tuple[float, Params]:
    if len(batch) == 0:
        raise ValueError('Batch is empty.')
    trace = forward(params, masks, batch.inputs, config, batch.covariates)
    terms, d_eta = nll_cells(trace.eta, batch.responses, config.heads)
    scale = config.n_train / len(batch)
    value = scale * float(terms.sum()) + penalty(params, config)
    d_eta = scale * d_eta

    k = config.representation_dim
    h = trace.representation
    head_w = params.head_weights[:, :k]
    z = masks.heads
    if z.ndim == 2:
        grad_head_w = (d_eta.T @ h) * z
        d_h = d_eta @ (head_w * z)
    else:
        grad_head_w = np.einsum('bj,bk,bjk->jk', d_eta, h, z)
        d_h = np.einsum('bj,bjk,jk->bk', d_eta, z, head_w)
    grad_head = np.zeros_like(params.head_weights)
    grad_head[:, :k] = grad_head_w
    if trace.covariates is not None:
        grad_head[:, k:] = d_eta.T @ trace.covariates

    _, act_grad = ACTIVATIONS[config.hidden_activation]
    grad_w: list[np.ndarray] = [None] * len(params.weights)
    grad_b: list[np.ndarray] = [None] * len(params.biases)
    for layer in reversed(range(len(params.weights))):
        a_prev = trace.inputs if layer == 0 else trace.post[layer - 1]
        d_f = d_h * masks.hidden[layer] * act_grad(trace.pre[layer])
        grad_w[layer] = d_f.T @ a_prev
        grad_b[layer] = d_f.sum(axis=0)
        d_h = d_f @ params.weights[layer]

    for layer, lam in enumerate(config.layer_lambdas()):
        grad_w[layer] = grad_w[layer] + 2.0 * lam * params.weights[layer]
        grad_b[layer] = grad_b[layer] + 2.0 * lam * params.biases[layer]
    head_lam = config.head_lambdas()
    grad_head = grad_head + 2.0 * head_lam[:, None] * params.head_weights
    grad_head_b = d_eta.sum(axis=0) + 2.0 * head_lam * params.head_biases

    return value, Params(weights=grad_w, biases=grad_b, head_weights=grad_head, head_biases=grad_head_b)


def loss(params: Params, masks: MaskSet, batch: Batch, config: NetworkConfig) -> float:
    return loss_and_grad(params, masks, batch, config)[0]


def grad(params: Params, masks: MaskSet, batch: Batch, config: NetworkConfig) -> Params:
    return loss_and_grad(params, masks, batch, config)[1]


def deterministic_eta(params: Params, config: NetworkConfig, inputs, covariates=None) -> np.ndarray:
    return forward(params, MaskSet.expected(config), inputs, config, covariates).eta


def estimate_sigma2(params: Params, config: NetworkConfig, batch: Batch) -> dict[str, float]:
    """Mean squared residual of the deterministic predictor per continuous outcome."""
    eta = deterministic_eta(params, config, batch.inputs, batch.covariates)
    estimates = {}
    for j, spec in enumerate(config.heads):
        if spec.kind is not OutcomeKind.CONTINUOUS:
            continue
        observed = ~np.isnan(batch.responses[:, j])
        if observed.sum() < 2:
            raise DegenerateSample(f"Outcome '{spec.name}' has fewer than two observed training cells.")
        residuals = batch.responses[observed, j] - eta[observed, j]
        estimates[spec.name] = float(np.mean(residuals ** 2))
    return estimates


def layer_kernel(phi_prev, w, b, activation: str, width: int) -> np.ndarray:
    """Empirical layer covariance ``F F^T / width`` with ``F = act(phi W^T + b)``."""
    phi_prev = np.atleast_2d(np.asarray(phi_prev, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if phi_prev.shape[1] != w.shape[1] or np.shape(b) != (w.shape[0],):
        raise DimensionMismatch('Layer inputs, weights and biases disagree.')
    act, _ = ACTIVATIONS[activation]
    features = act(phi_prev @ w.T + np.asarray(b, dtype=float))
    return features @ features.T / width


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values) -> 'Standardizer':
        values = np.atleast_2d(np.asarray(values, dtype=float))
        scale = values.std(axis=0)
        return cls(mean=values.mean(axis=0), scale=np.where(scale > 0, scale, 1.0))

    def transform(self, values) -> np.ndarray:
        return (np.atleast_2d(np.asarray(values, dtype=float)) - self.mean) / self.scale


@dataclass
class FittedModel:
    """Trained parameters plus everything needed to map locations to predictors."""

    config: NetworkConfig
    params: Params
    embedding: SpatialEmbedding
    input_scaler: Standardizer
    covariate_scaler: Standardizer | None = None
    sigma2: dict[str, float] = field(default_factory=dict)
    model_hash: str = ''

    @property
    def heads(self) -> tuple[OutcomeSpec, ...]:
        return self.config.heads

    def design(self, coords, covariates=None) -> tuple[np.ndarray, np.ndarray | None]:
        inputs = self.input_scaler.transform(self.embedding.transform(coords))
        if self.config.covariate_dim == 0:
            return inputs, None
        if covariates is None:
            raise DimensionMismatch('This model was trained with covariates; none were given.')
        return inputs, self.covariate_scaler.transform(covariates)

    def batch(self, coords, responses, covariates=None) -> Batch:
        inputs, cov = self.design(coords, covariates)
        return Batch(inputs=inputs, responses=np.asarray(responses, dtype=float), covariates=cov)

    def deterministic_eta(self, coords, covariates=None) -> np.ndarray:
        inputs, cov = self.design(coords, covariates)
        return deterministic_eta(self.params, self.config, inputs, cov)

    def with_params(self, params: Params) -> 'FittedModel':
        return replace(self, params=params)
