import itertools
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from multideepgp.datagen import OutcomeKind, OutcomeSpec
from multideepgp.exceptions import DimensionMismatch, EmptyInput, InvalidInterval, SingleClassError
from multideepgp.metrics import (
    aggregate,
    auc,
    brier,
    coverage_and_width,
    read_replicate_csv,
    replicate_frame,
    rmse,
    score_outcome,
    timing_summary,
)
from multideepgp.numerics import RngStream


def _pair_auc(labels, scores) -> float:
    positives = [s for y, s in zip(labels, scores) if y == 1]
    negatives = [s for y, s in zip(labels, scores) if y == 0]
    total = 0.0
    for p, n in itertools.product(positives, negatives):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(positives) * len(negatives))


class UT20_ClassificationMetricTests(SimpleTestCase):
    """UT-20: AUC and Brier score"""

    def test_UT_20_1_1_auc_known_values(self):
        """UT-20.1.1: Separated scores give 1, all ties give 0.5, and a hand-enumerated case gives 0.5"""
        self.assertEqual(auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]), 1.0)
        self.assertEqual(auc([0, 1, 0, 1], [0.4, 0.4, 0.4, 0.4]), 0.5)
        self.assertEqual(auc([0, 1, 0], [0.2, 0.5, 0.7]), 0.5)

    def test_UT_20_1_2_auc_single_class(self):
        """UT-20.1.2: Single-class labels raise SingleClassError"""
        with self.assertRaises(SingleClassError):
            auc([1, 1, 1], [0.1, 0.2, 0.3])

    def test_UT_20_1_3_auc_matches_pair_oracle(self):
        """UT-20.1.3: Rank-sum AUC equals pair enumeration on 200 random instances with ties"""
        rng = RngStream(99)
        for trial in range(200):
            stream = rng.split('trial', trial)
            n = 2 + int(stream.split('n').uniform() * 49)
            labels = stream.split('labels').bernoulli(np.full(n, 0.5))
            labels[0], labels[1] = 0.0, 1.0
            scores = np.round(stream.split('scores').uniform(n) * 5) / 5
            self.assertAlmostEqual(auc(labels, scores), _pair_auc(labels, scores), places=12)

    def test_UT_20_1_4_auc_complement(self):
        """UT-20.1.4: Without ties, AUC of negated scores is the complement"""
        rng = RngStream(3)
        labels = rng.split('y').bernoulli(np.full(30, 0.4))
        labels[:2] = [0.0, 1.0]
        scores = rng.split('s').normal(30)
        self.assertAlmostEqual(auc(labels, scores) + auc(labels, -scores), 1.0, places=12)

    def test_UT_20_2_1_brier_known_values(self):
        """UT-20.2.1: Perfect probabilities give 0, constant halves give 0.25, and (1,0)/(0.8,0.4) gives 0.10"""
        self.assertEqual(brier([1, 0, 1], [1.0, 0.0, 1.0]), 0.0)
        self.assertEqual(brier([1, 0, 0, 1, 1], np.full(5, 0.5)), 0.25)
        self.assertAlmostEqual(brier([1, 0], [0.8, 0.4]), 0.10, places=12)

    def test_UT_20_2_2_brier_of_base_rate(self):
        """UT-20.2.2: The constant base-rate predictor scores p(1 - p)"""
        labels = np.array([1, 0, 0, 1, 0, 0, 0, 1], dtype=float)
        p = labels.mean()
        self.assertAlmostEqual(brier(labels, np.full(8, p)), p * (1 - p), places=12)

    def test_UT_20_2_3_brier_out_of_range(self):
        """UT-20.2.3: Probabilities outside [0, 1] are rejected"""
        with self.assertRaises(ValueError):
            brier([1, 0], [1.2, 0.1])


class UT21_RegressionMetricTests(SimpleTestCase):
    """UT-21: RMSE, coverage and width"""

    def test_UT_21_1_1_rmse_known_values(self):
        """UT-21.1.1: Identical vectors give 0; errors (3, 4) give sqrt(12.5)"""
        self.assertEqual(rmse([1, 2, 3], [1, 2, 3]), 0.0)
        self.assertAlmostEqual(rmse([0, 0], [3, 4]), math.sqrt(12.5), places=12)

    def test_UT_21_1_2_rmse_homogeneity(self):
        """UT-21.1.2: Scaling both vectors by c scales RMSE by |c|"""
        a, b = np.array([1.0, -2.0, 0.5]), np.array([0.0, 1.0, 2.0])
        self.assertAlmostEqual(rmse(-3 * a, -3 * b), 3 * rmse(a, b), places=12)

    def test_UT_21_1_3_rmse_length_mismatch(self):
        """UT-21.1.3: Vectors of different lengths are rejected"""
        with self.assertRaises(DimensionMismatch):
            rmse([1, 2], [1])
        with self.assertRaises(EmptyInput):
            rmse([], [])

    def test_UT_21_2_1_coverage_known_values(self):
        """UT-21.2.1: Wide intervals cover all; degenerate intervals at truth cover with width 0"""
        truth = np.array([0.0, 5.0, -2.0])
        self.assertEqual(coverage_and_width(truth, truth - 1e9, truth + 1e9)[0], 1.0)
        self.assertEqual(coverage_and_width(truth, truth, truth), (1.0, 0.0))
        self.assertEqual(coverage_and_width([0, 5], [-1, 0], [1, 1]), (0.5, 1.5))

    def test_UT_21_2_2_coverage_monotone_relabel(self):
        """UT-21.2.2: Coverage is unchanged by a monotone map applied to truth and endpoints"""
        rng = RngStream(4)
        truth = rng.split('t').normal(50)
        lo = truth - rng.split('a').uniform(50)
        hi = lo + 2 * rng.split('b').uniform(50)
        self.assertEqual(
            coverage_and_width(truth, lo, hi)[0],
            coverage_and_width(np.exp(truth), np.exp(lo), np.exp(hi))[0],
        )

    def test_UT_21_2_3_crossed_endpoints(self):
        """UT-21.2.3: lo > hi raises InvalidInterval"""
        with self.assertRaises(InvalidInterval):
            coverage_and_width([0.0], [1.0], [0.0])

    def test_UT_21_3_1_score_outcome_binary_single_class(self):
        """UT-21.3.1: A single-class binary test set keeps Brier and skips AUC"""
        spec = OutcomeSpec('b', OutcomeKind.BINARY)
        with self.assertLogs('multideepgp.metrics', level='WARNING'):
            scores = score_outcome(spec, [1, 1, np.nan], [0.9, 0.7, 0.5])
        self.assertEqual(set(scores), {'brier'})

    def test_UT_21_3_2_score_outcome_without_interval(self):
        """UT-21.3.2: Missing interval endpoints give RMSE only"""
        spec = OutcomeSpec('y', OutcomeKind.CONTINUOUS)
        scores = score_outcome(spec, [1.0, 2.0], [1.0, 2.0], [np.nan, np.nan], [np.nan, np.nan])
        self.assertEqual(scores, {'rmse': 0.0})


class UT22_AggregationTests(SimpleTestCase):
    """UT-22: Replicate aggregation and report tables"""

    def _frame(self, values, method='kriging'):
        return replicate_frame([
            {'replicate': r, 'method': method, 'outcome': 'count', 'metric': 'rmse', 'value': v}
            for r, v in enumerate(values)
        ])

    def test_UT_22_1_1_single_replicate(self):
        """UT-22.1.1: One replicate gives its value with sd 0"""
        report = aggregate(self._frame([0.7]))
        self.assertEqual(report.value('kriging', 'count', 'rmse'), (0.7, 0.0))

    def test_UT_22_1_2_two_replicates(self):
        """UT-22.1.2: Values (1, 3) give mean 2 and sd sqrt(2)"""
        mean, sd = aggregate(self._frame([1.0, 3.0])).value('kriging', 'count', 'rmse')
        self.assertEqual(mean, 2.0)
        self.assertAlmostEqual(sd, math.sqrt(2.0), places=12)

    def test_UT_22_1_3_permutation_invariance(self):
        """UT-22.1.3: Shuffling replicate order leaves the report unchanged"""
        frame = self._frame([0.3, 1.9, 0.8, 2.4])
        shuffled = frame.sample(frac=1.0, random_state=3)
        pd.testing.assert_frame_equal(aggregate(frame).to_table(), aggregate(shuffled).to_table())

    def test_UT_22_1_4_empty_input(self):
        """UT-22.1.4: No replicate scores raise EmptyInput"""
        with self.assertRaises(EmptyInput):
            aggregate(replicate_frame([]))

    def test_UT_22_2_1_table_layout(self):
        """UT-22.2.1: The table has one column per method with 'mean (sd)' cells and '--' gaps"""
        frame = pd.concat([
            self._frame([1.0, 3.0], method='multideepgp'),
            replicate_frame([{'replicate': 0, 'method': 'kriging', 'outcome': 'count', 'metric': 'coverage',
                              'value': 0.9}]),
        ])
        table = aggregate(frame, methods=['multideepgp', 'kriging'], outcomes=['count']).to_table()
        self.assertEqual(list(table.columns), ['outcome', 'metric', 'multideepgp', 'kriging'])
        rmse_row = table[table['metric'] == 'rmse'].iloc[0]
        self.assertEqual(rmse_row['multideepgp'], '2.000 (1.414)')
        self.assertEqual(rmse_row['kriging'], '--')
        self.assertEqual(list(table['metric']), ['rmse', 'coverage'])

    def test_UT_22_2_2_csv_round_trip(self):
        """UT-22.2.2: A replicate CSV written with a header comment reads back for aggregation"""
        frame = self._frame([1.0, 2.0])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'replicates.csv'
            with open(path, 'w', encoding='utf-8') as fh:
                fh.write('# multideepgp test\n')
                frame.to_csv(fh, index=False)
            back = read_replicate_csv(path)
        pd.testing.assert_frame_equal(aggregate(back).summary, aggregate(frame).summary)

    def test_UT_22_3_1_timing_summary(self):
        """UT-22.3.1: Timing summaries report per-method mean and sd"""
        timings = pd.DataFrame({'replicate': [0, 1], 'method': ['kriging', 'kriging'], 'seconds': [1.0, 3.0]})
        summary = timing_summary(timings)
        self.assertEqual(list(summary.columns), ['method', 'mean_seconds', 'sd_seconds'])
        self.assertEqual(summary['mean_seconds'].iloc[0], 2.0)
