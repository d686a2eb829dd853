"""
Evaluation metrics and replicate aggregation.

Binary outcomes are scored by AUC and Brier score; count and continuous
outcomes by RMSE and, where a method emits intervals, empirical coverage and
mean interval width. Replicate scores are summarized as mean and sample
standard deviation, and written as a table with one column per method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .datagen import OutcomeKind, OutcomeSpec
from .exceptions import DimensionMismatch, EmptyInput, InvalidInterval, SingleClassError

logger = logging.getLogger(__name__)

METRIC_ORDER = ('auc', 'brier', 'rmse', 'coverage', 'width')
REPLICATE_COLUMNS = ['replicate', 'method', 'outcome', 'metric', 'value']


def _pair(a, b, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != len(b):
        raise DimensionMismatch(f'{what}: lengths {len(a)} and {len(b)} differ.')
    if len(a) == 0:
        raise EmptyInput(f'{what}: no values.')
    return a, b


def auc(labels, scores) -> float:
    """Mann-Whitney AUC from rank sums; ties count one half."""
    labels, scores = _pair(labels, scores, 'auc')
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError('AUC needs both classes among the labels.')
    ranks = rankdata(scores, method='average')
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def brier(labels, probs) -> float:
    labels, probs = _pair(labels, probs, 'brier')
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError('Probabilities must lie in [0, 1].')
    return float(np.mean((labels - probs) ** 2))


def rmse(truth, pred) -> float:
    truth, pred = _pair(truth, pred, 'rmse')
    return math.sqrt(float(np.mean((truth - pred) ** 2)))


def coverage_and_width(truth, lo, hi) -> tuple[float, float]:
    truth, lo = _pair(truth, lo, 'coverage')
    _, hi = _pair(truth, hi, 'coverage')
    if np.any(lo > hi):
        raise InvalidInterval('Interval lower endpoint exceeds the upper endpoint.')
    covered = (lo <= truth) & (truth <= hi)
    return float(covered.mean()), float(np.mean(hi - lo))


def score_outcome(spec: OutcomeSpec, truth, mean, lo=None, hi=None) -> dict[str, float]:
    """Metrics for one outcome on the observed test cells."""
    truth = np.asarray(truth, dtype=float)
    observed = ~np.isnan(truth)
    truth, mean = truth[observed], np.asarray(mean, dtype=float)[observed]
    if len(truth) == 0:
        return {}
    scores: dict[str, float] = {}
    if spec.kind is OutcomeKind.BINARY:
        try:
            scores['auc'] = auc(truth, mean)
        except SingleClassError:
            logger.warning("Outcome '%s' has a single class in the test set; AUC skipped", spec.name)
        scores['brier'] = brier(truth, mean)
        return scores

    scores['rmse'] = rmse(truth, mean)
    if lo is not None and hi is not None:
        lo = np.asarray(lo, dtype=float)[observed]
        hi = np.asarray(hi, dtype=float)[observed]
        if not np.any(np.isnan(lo) | np.isnan(hi)):
            scores['coverage'], scores['width'] = coverage_and_width(truth, lo, hi)
    return scores


def score_prediction(prediction, truth: np.ndarray) -> dict[tuple[str, str], float]:
    """Score every outcome of a ``Prediction`` against an ``n x J`` truth table."""
    results = {}
    for j, spec in enumerate(prediction.outcomes):
        for metric, value in score_outcome(
            spec, truth[:, j], prediction.mean[:, j], prediction.lo[:, j], prediction.hi[:, j]
        ).items():
            results[(spec.name, metric)] = value
    return results


def replicate_frame(records: Sequence[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(records), columns=REPLICATE_COLUMNS)
    return frame.sort_values(['replicate', 'method', 'outcome', 'metric'], kind='stable').reset_index(drop=True)


@dataclass
class MetricReport:
    """Replicate mean and sample sd for each (method, outcome, metric)."""

    summary: pd.DataFrame
    methods: tuple[str, ...]
    outcomes: tuple[str, ...]

    def value(self, method: str, outcome: str, metric: str) -> tuple[float, float]:
        row = self.summary[
            (self.summary['method'] == method)
            & (self.summary['outcome'] == outcome)
            & (self.summary['metric'] == metric)
        ]
        if row.empty:
            raise KeyError((method, outcome, metric))
        return float(row['mean'].iloc[0]), float(row['sd'].iloc[0])

    def to_table(self) -> pd.DataFrame:
        cells = {
            (r.outcome, r.metric, r.method): f'{r.mean:.3f} ({r.sd:.3f})'
            for r in self.summary.itertuples(index=False)
        }
        rows = []
        for outcome in self.outcomes:
            for metric in METRIC_ORDER:
                if not any((outcome, metric, method) in cells for method in self.methods):
                    continue
                row = {'outcome': outcome, 'metric': metric}
                row.update({method: cells.get((outcome, metric, method), '--') for method in self.methods})
                rows.append(row)
        return pd.DataFrame(rows, columns=['outcome', 'metric', *self.methods])

    def to_csv(self, path, header_comment: str | None = None) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            if header_comment:
                fh.write(f'# {header_comment}\n')
            self.to_table().to_csv(fh, index=False, lineterminator='\n')


def _sample_sd(values: pd.Series) -> float:
    return float(values.std(ddof=1)) if len(values) > 1 else 0.0


def aggregate(
    replicates: pd.DataFrame,
    methods: Sequence[str] | None = None,
    outcomes: Sequence[str] | None = None,
) -> MetricReport:
    """Summarize long-form replicate scores; independent of replicate order."""
    if replicates is None or replicates.empty:
        raise EmptyInput('No replicate scores to aggregate.')
    frame = replicates.sort_values(['method', 'outcome', 'metric', 'replicate'], kind='stable')
    grouped = frame.groupby(['method', 'outcome', 'metric'], sort=False)['value']
    summary = grouped.agg(mean='mean', sd=_sample_sd, n='count').reset_index()
    if methods is None:
        methods = list(dict.fromkeys(frame['method']))
    if outcomes is None:
        outcomes = list(dict.fromkeys(replicates['outcome']))
    return MetricReport(summary=summary, methods=tuple(methods), outcomes=tuple(outcomes))


def read_replicate_csv(path) -> pd.DataFrame:
    return pd.read_csv(
        path, comment='#', dtype={'method': str, 'outcome': str, 'metric': str}, float_precision='round_trip'
    )


def read_prediction_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#', keep_default_na=True)


def timing_summary(timings: pd.DataFrame) -> pd.DataFrame:
    """Per-method mean and sd of wall-clock seconds; ``timings`` has method and seconds columns."""
    if timings.empty:
        return pd.DataFrame(columns=['method', 'mean_seconds', 'sd_seconds'])
    grouped = timings.groupby('method', sort=False)['seconds']
    return grouped.agg(mean_seconds='mean', sd_seconds=_sample_sd).reset_index()
