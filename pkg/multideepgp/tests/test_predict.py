import numpy as np
from django.test import SimpleTestCase

from multideepgp.datagen import MIXED_OUTCOMES, OutcomeKind, OutcomeSpec
from multideepgp.exceptions import MissingVariance, ZeroVarianceSurface
from multideepgp.network import forward, sample_masks
from multideepgp.numerics import RngStream
from multideepgp.predict import (
    INTERVAL_CHUNK,
    PredictConfig,
    PredictiveSamples,
    composite_score,
    idw_grid,
    mc_forward,
    point_prediction,
    predict,
    predictive_interval,
    predictive_mean,
    predictive_sd,
)

from .factories import toy_model

BINARY = OutcomeSpec('b', OutcomeKind.BINARY)
COUNT = OutcomeSpec('c', OutcomeKind.COUNT)
CONTINUOUS = OutcomeSpec('y', OutcomeKind.CONTINUOUS)


class UT13_MonteCarloTests(SimpleTestCase):
    """UT-13: MC-dropout draws, predictive means and sds"""

    def test_UT_13_1_1_keep_one_draws_identical(self):
        """UT-13.1.1: Without dropout every MC draw is the same"""
        model = toy_model(keep_prob=1.0, seed=5)
        samples = mc_forward(model, np.linspace(0, 1, 7), None, PredictConfig(m_draws=6))
        self.assertEqual(samples.eta.shape, (6, 7, 3))
        for m in range(1, 6):
            np.testing.assert_array_equal(samples.eta[m], samples.eta[0])
        self.assertEqual(len(set(samples.stream_ids)), 6)

    def test_UT_13_1_3_single_draw_is_one_forward_pass(self):
        """UT-13.1.3: m_draws = 1 reproduces one masked forward pass on the first draw stream"""
        model = toy_model(keep_prob=0.7, hidden_widths=(16,), seed=5)
        coords = np.linspace(0, 1, 7)
        base = RngStream(12).split('mc')
        samples = mc_forward(model, coords, None, PredictConfig(m_draws=1), rng=base)
        inputs, _ = model.design(coords)
        masks = sample_masks(model.config, base.split('draw', 0))
        expected = forward(model.params, masks, inputs, model.config).eta
        np.testing.assert_array_equal(samples.eta[0], expected)

    def test_UT_13_1_4_spread_grows_as_keep_drops(self):
        """UT-13.1.4: The across-draw variance of eta does not shrink as the keep probability falls"""
        coords = np.linspace(0, 1, 7)
        spreads = []
        for keep in (1.0, 0.9, 0.75, 0.5):
            model = toy_model(keep_prob=keep, head_keep_prob=1.0, hidden_widths=(32,), seed=5)
            eta = mc_forward(model, coords, None, PredictConfig(m_draws=2000, seed=3)).eta
            spreads.append(eta.var(axis=0).sum())
        self.assertEqual(spreads[0], 0.0)
        self.assertTrue(all(a <= b for a, b in zip(spreads, spreads[1:])), spreads)

    def test_UT_13_1_2_dropout_draws_differ(self):
        """UT-13.1.2: With dropout the draws vary"""
        model = toy_model(keep_prob=0.5, hidden_widths=(32,), seed=5)
        samples = mc_forward(model, np.linspace(0, 1, 7), None, PredictConfig(m_draws=6))
        self.assertGreater(np.ptp(samples.eta[:, 0, 0]), 0.0)

    def test_UT_13_2_1_mean_at_zero_eta(self):
        """UT-13.2.1: eta = 0 gives probability 0.5 and rate 1"""
        samples = PredictiveSamples(eta=np.zeros((4, 2, 2)))
        np.testing.assert_allclose(predictive_mean(samples, (BINARY, COUNT)), [[0.5, 1.0], [0.5, 1.0]])

    def test_UT_13_2_2_continuous_mean_of_draws(self):
        """UT-13.2.2: Continuous draws {1, 3} average to 2"""
        samples = PredictiveSamples(eta=np.array([[[1.0]], [[3.0]]]))
        self.assertEqual(predictive_mean(samples, (CONTINUOUS,))[0, 0], 2.0)
        self.assertEqual(predictive_sd(samples, (CONTINUOUS,))[0, 0], 1.0)


class UT14_IntervalTests(SimpleTestCase):
    """UT-14: Predictive intervals from simulated responses"""

    def test_UT_14_1_1_degenerate_continuous(self):
        """UT-14.1.1: Identical draws with zero variance give a zero-width interval at eta"""
        samples = PredictiveSamples(eta=np.full((5, 3, 1), 0.7))
        lo, hi = predictive_interval(samples, (CONTINUOUS,), {'y': 0.0}, PredictConfig(m_draws=5))
        np.testing.assert_allclose(lo, 0.7)
        np.testing.assert_allclose(hi, 0.7)

    def test_UT_14_1_2_gaussian_width(self):
        """UT-14.1.2: Unit variance at level 0.95 gives width within 10% of 2 x 1.96"""
        samples = PredictiveSamples(eta=np.zeros((200, 4, 1)))
        lo, hi = predictive_interval(
            samples, (CONTINUOUS,), {'y': 1.0}, PredictConfig(m_draws=200, y_sample_per_draw=20)
        )
        np.testing.assert_allclose(hi - lo, 2 * 1.96, rtol=0.1)

    def test_UT_14_1_3_poisson_one(self):
        """UT-14.1.3: A unit Poisson rate at level 0.95 gives the interval [0, 3]"""
        samples = PredictiveSamples(eta=np.zeros((200, 3, 1)))
        lo, hi = predictive_interval(samples, (COUNT,), {}, PredictConfig(m_draws=200, y_sample_per_draw=20))
        np.testing.assert_array_equal(lo, 0.0)
        np.testing.assert_array_equal(hi, 3.0)

    def test_UT_14_1_4_missing_variance(self):
        """UT-14.1.4: A continuous head without a residual variance raises MissingVariance"""
        with self.assertRaises(MissingVariance):
            predictive_interval(PredictiveSamples(eta=np.zeros((2, 1, 1))), (CONTINUOUS,), {}, PredictConfig())

    def test_UT_14_1_5_gaussian_coverage_oracle(self):
        """UT-14.1.5: Known-model Gaussian intervals cover 95% +/- 2% of 5000 cells"""
        n = 5000
        mu = 3.0 * RngStream(1).normal(n)
        samples = PredictiveSamples(eta=np.broadcast_to(mu[None, :, None], (10, n, 1)).copy())
        lo, hi = predictive_interval(samples, (CONTINUOUS,), {'y': 1.0}, PredictConfig(m_draws=10, y_sample_per_draw=40))
        truth = mu + RngStream(2).normal(n)
        coverage = np.mean((lo[:, 0] <= truth) & (truth <= hi[:, 0]))
        self.assertTrue(0.93 <= coverage <= 0.97, coverage)

    def test_UT_14_1_6_binary_interval_bounds(self):
        """UT-14.1.6: Binary intervals are 0/1 endpoints"""
        samples = PredictiveSamples(eta=np.zeros((50, 2, 1)))
        lo, hi = predictive_interval(samples, (BINARY,), {}, PredictConfig(m_draws=50))
        np.testing.assert_array_equal(lo, 0.0)
        np.testing.assert_array_equal(hi, 1.0)

    def test_UT_14_1_7_binary_endpoints_snapped(self):
        """UT-14.1.7: Rare-event binary intervals still have 0/1 endpoints"""
        eta = np.full((5, 4, 1), np.log(0.025 / 0.975))
        samples = PredictiveSamples(eta=eta)
        for seed in range(200):
            lo, hi = predictive_interval(samples, (BINARY,), {}, PredictConfig(m_draws=5, y_sample_per_draw=8, seed=seed))
            self.assertTrue(np.isin(lo, (0.0, 1.0)).all() and np.isin(hi, (0.0, 1.0)).all(), (seed, lo, hi))
            self.assertTrue(np.all(lo <= hi))

    def test_UT_14_2_1_chunks_independent_of_later_locations(self):
        """UT-14.2.1: Intervals in the first block do not change when more locations follow"""
        eta = 0.3 * RngStream(4).normal((6, 2 * INTERVAL_CHUNK + 37, 3))
        samples = PredictiveSamples(eta=eta)
        head = PredictiveSamples(eta=eta[:, :INTERVAL_CHUNK].copy())
        pcfg = PredictConfig(m_draws=6, y_sample_per_draw=5, seed=8)
        lo, hi = predictive_interval(samples, MIXED_OUTCOMES, {'continuous': 0.4}, pcfg)
        lo_head, hi_head = predictive_interval(head, MIXED_OUTCOMES, {'continuous': 0.4}, pcfg)
        self.assertEqual(lo.shape, (2 * INTERVAL_CHUNK + 37, 3))
        np.testing.assert_array_equal(lo[:INTERVAL_CHUNK], lo_head)
        np.testing.assert_array_equal(hi[:INTERVAL_CHUNK], hi_head)
        self.assertTrue(np.all(lo <= hi))

    def test_UT_14_2_2_chunked_intervals_reproducible(self):
        """UT-14.2.2: Chunked intervals repeat exactly under one seed and respect the chunk size"""
        eta = RngStream(5).normal((4, 23, 1))
        samples = PredictiveSamples(eta=eta)
        pcfg = PredictConfig(m_draws=4, y_sample_per_draw=10, seed=2)
        a = predictive_interval(samples, (CONTINUOUS,), {'y': 1.0}, pcfg, chunk_size=5)
        b = predictive_interval(samples, (CONTINUOUS,), {'y': 1.0}, pcfg, chunk_size=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        first = predictive_interval(PredictiveSamples(eta=eta[:, :5].copy()), (CONTINUOUS,), {'y': 1.0}, pcfg, chunk_size=5)
        np.testing.assert_array_equal(a[0][:5], first[0])
        with self.assertRaises(ValueError):
            predictive_interval(samples, (CONTINUOUS,), {'y': 1.0}, pcfg, chunk_size=0)


class UT15_PredictTests(SimpleTestCase):
    """UT-15: End-to-end prediction, point prediction and composite scores"""

    def setUp(self):
        self.model = toy_model(keep_prob=0.8, hidden_widths=(16,), seed=7, sigma2={'continuous': 0.5})
        self.coords = np.linspace(0, 1, 9)

    def test_UT_15_1_1_identical_seeds_identical_predictions(self):
        """UT-15.1.1: Two predictions with one seed are identical"""
        pcfg = PredictConfig(m_draws=20, y_sample_per_draw=10, seed=4)
        a, b = predict(self.model, self.coords, None, pcfg), predict(self.model, self.coords, None, pcfg)
        for name in ('mean', 'lo', 'hi', 'sd'):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_UT_15_1_2_higher_level_contains_lower(self):
        """UT-15.1.2: Level 0.99 intervals contain the level 0.95 ones under one seed"""
        narrow = predict(self.model, self.coords, None, PredictConfig(m_draws=20, level=0.95, seed=4))
        wide = predict(self.model, self.coords, None, PredictConfig(m_draws=20, level=0.99, seed=4))
        self.assertTrue(np.all(wide.lo <= narrow.lo) and np.all(wide.hi >= narrow.hi))

    def test_UT_15_1_3_single_location_without_dropout(self):
        """UT-15.1.3: One location, one draw, no dropout gives a single deterministic row per outcome"""
        model = toy_model(keep_prob=1.0, seed=7, sigma2={'continuous': 0.5})
        prediction = predict(model, [0.5], None, PredictConfig(m_draws=1))
        frame = prediction.to_frame()
        self.assertEqual(len(frame), 3)
        self.assertEqual(list(frame.columns), ['row', 'x', 'outcome', 'mean', 'lo', 'hi', 'sd'])
        np.testing.assert_array_equal(prediction.sd, 0.0)

    def test_UT_15_1_4_point_prediction(self):
        """UT-15.1.4: The deterministic predictor applies inverse links and emits no intervals"""
        prediction = point_prediction(self.model, self.coords)
        eta = self.model.deterministic_eta(self.coords)
        np.testing.assert_allclose(prediction.mean[:, 1], np.exp(eta[:, 1]))
        np.testing.assert_allclose(prediction.mean[:, 2], eta[:, 2])
        self.assertTrue(np.isnan(prediction.lo).all() and np.isnan(prediction.hi).all())

    def test_UT_15_2_1_composite_single_surface(self):
        """UT-15.2.1: One outcome's composite score is its z-score"""
        x = np.array([1.0, 2.0, 4.0, 7.0])
        np.testing.assert_allclose(composite_score(x), (x - x.mean()) / x.std())

    def test_UT_15_2_2_composite_duplicates_and_opposites(self):
        """UT-15.2.2: Duplicate surfaces equal either one; opposite surfaces cancel"""
        x = np.array([1.0, 2.0, 4.0, 7.0])
        np.testing.assert_allclose(composite_score(np.column_stack([x, x])), composite_score(x))
        np.testing.assert_allclose(composite_score(np.column_stack([x, -x])), 0.0, atol=1e-12)

    def test_UT_15_2_3_composite_constant_surface(self):
        """UT-15.2.3: A constant surface cannot be standardized"""
        with self.assertRaises(ZeroVarianceSurface):
            composite_score(np.ones((5, 2)))

    def test_UT_15_3_1_idw_grid(self):
        """UT-15.3.1: The IDW grid is R x R, hits data points exactly and preserves constants"""
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, 0.6]])
        grid = idw_grid(coords, np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 4)
        self.assertEqual(len(grid), 16)
        self.assertEqual(list(grid.columns), ['x', 'y', 'score'])
        corner = grid[(grid['x'] == 0.0) & (grid['y'] == 0.0)]['score'].iloc[0]
        self.assertEqual(corner, 1.0)
        flat = idw_grid(coords, np.full(5, 2.5), 3)
        np.testing.assert_allclose(flat['score'], 2.5)

    def test_UT_15_3_2_mixed_heads_from_factory(self):
        """UT-15.3.2: Predictions carry the model's outcome names in order"""
        prediction = predict(self.model, self.coords, None, PredictConfig(m_draws=3))
        self.assertEqual(prediction.outcome_names, [spec.name for spec in MIXED_OUTCOMES])
