from unittest import TestCase

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from a2g_toolbox.channel_model import Geometry, LinkBudget, PropagationModel
from a2g_toolbox.classes import DomainError, Strategy
from a2g_toolbox.direct_link import outage_dc
from a2g_toolbox.monte_carlo import (
    MonteCarloEstimate,
    sample_ppp_disk,
    sample_rician_power,
    simulate_outage,
    simulate_strategies,
)
from a2g_toolbox.relay_network import RelayField, mean_decoding_set_size, outage_rc


@pytest.fixture(params=[0.0, 1.0, 10**0.5, 10**1.5])
def k_factor(request):
    return request.param


class TestSampling:
    def test_rician_power_moments(self, k_factor):
        rng = np.random.default_rng(5)
        samples = sample_rician_power(k_factor, rng, size=400_000)
        variance = (1 + 2 * k_factor) / (k_factor + 1) ** 2
        assert_allclose(samples.mean(), 1.0, atol=0.01)
        assert_allclose(samples.var(), variance, rtol=0.03)
        assert np.all(samples >= 0)

    def test_rician_power_broadcasts(self):
        rng = np.random.default_rng(0)
        samples = sample_rician_power(np.array([0.0, 3.0, 30.0]), rng)
        assert samples.shape == (3,)

    def test_negative_factor(self):
        with pytest.raises(DomainError):
            sample_rician_power(-1.0, np.random.default_rng(0), size=4)


class TestPoissonDisk(TestCase):
    def test_mean_count_and_support(self):
        rng = np.random.default_rng(17)
        density, radius = 2e-4, 200.0
        counts = []
        for _ in range(2000):
            points = sample_ppp_disk(density, radius, rng)
            self.assertTrue(np.all(points.r <= radius))
            self.assertTrue(np.all((points.phi >= 0) & (points.phi < 2 * np.pi)))
            counts.append(points.r.size)
        expected = density * np.pi * radius**2
        assert_allclose(np.mean(counts), expected, rtol=0.02)
        assert_allclose(np.var(counts), expected, rtol=0.1)

    def test_uniform_in_area(self):
        points = sample_ppp_disk(0.5, 100.0, np.random.default_rng(3))
        self.assertGreater(points.r.size, 10_000)
        inner = np.mean(points.r <= 100.0 / np.sqrt(2))
        sigma = 0.5 / np.sqrt(points.r.size)
        assert_allclose(inner, 0.5, atol=4 * sigma)
        # (r / R)^2 is uniform on [0, 1] for a uniform draw over the disk
        result = stats.kstest((points.r / 100.0) ** 2, "uniform")
        self.assertGreater(result.pvalue, 1e-3)

    def test_invalid(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(DomainError):
            sample_ppp_disk(-1.0, 100.0, rng)
        with self.assertRaises(DomainError):
            sample_ppp_disk(1e-3, 0.0, rng)


class TestEstimate(TestCase):
    def test_from_count(self):
        estimate = MonteCarloEstimate.from_count(25, 100, 7)
        self.assertEqual(estimate.p_hat, 0.25)
        assert_allclose(estimate.std_err, np.sqrt(0.25 * 0.75 / 100))
        self.assertFalse(estimate.degenerate)
        self.assertTrue(MonteCarloEstimate.from_count(0, 100, 7).degenerate)


class TestSimulation(TestCase):
    def setUp(self):
        self.model = PropagationModel.case_study()
        self.budget = LinkBudget.case_study()
        self.field = RelayField(3e-4, 300.0)

    def test_independent_of_worker_count(self):
        args = (Strategy.COOPERATIVE, 200.0, 500.0, self.field, self.model)
        serial = simulate_outage(*args, self.budget, 2000, 9, block_size=250)
        threaded = simulate_outage(
            *args, self.budget, 2000, 9, block_size=250, workers=3
        )
        self.assertEqual(serial, threaded)

    def test_reproducible_from_seed(self):
        args = (Strategy.DIRECT, 700.0, 500.0, self.field, self.model, self.budget)
        first = simulate_outage(*args, 3000, 4, block_size=500)
        second = simulate_outage(*args, 3000, 4, block_size=500)
        self.assertEqual(first.p_hat, second.p_hat)
        self.assertEqual(first.seed, 4)

    def test_direct_link_against_analytic(self):
        for r_d, h in ((700.0, 500.0), (1000.0, 1300.0)):
            analytic = outage_dc(Geometry(r_d, h), self.model, self.budget)
            estimate = simulate_outage(
                Strategy.DIRECT, r_d, h, self.field, self.model, self.budget, 20000, 1
            )
            sigma = np.sqrt(analytic * (1 - analytic) / 20000)
            self.assertLessEqual(abs(estimate.p_hat - analytic), 4 * sigma)

    def test_relaying_against_analytic(self):
        analytic = outage_rc(300.0, 500.0, self.field, self.model, self.budget)
        estimate = simulate_outage(
            Strategy.RELAYING,
            300.0,
            500.0,
            self.field,
            self.model,
            self.budget,
            20000,
            2,
        )
        sigma = np.sqrt(analytic * (1 - analytic) / 20000)
        self.assertLessEqual(abs(estimate.p_hat - analytic), 4 * sigma)

    def test_shared_draws(self):
        result = simulate_strategies(
            200.0, 500.0, self.field, self.model, self.budget, 4000, 3, block_size=500
        )
        estimates = result.estimates
        self.assertLessEqual(
            estimates[Strategy.COOPERATIVE].p_hat,
            min(estimates[Strategy.DIRECT].p_hat, estimates[Strategy.RELAYING].p_hat),
        )
        for strategy in Strategy:
            single = simulate_outage(
                strategy,
                200.0,
                500.0,
                self.field,
                self.model,
                self.budget,
                4000,
                3,
                block_size=500,
                shared=True,
            )
            self.assertEqual(single, estimates[strategy])

    def test_direct_ignores_relay_field(self):
        args = (Strategy.DIRECT, 200.0, 500.0)
        sparse = simulate_outage(
            *args, RelayField(0.0, 300.0), self.model, self.budget, 3000, 6
        )
        dense = simulate_outage(
            *args, RelayField(1e-2, 300.0), self.model, self.budget, 3000, 6
        )
        self.assertEqual(sparse, dense)

    def test_decoding_set_size(self):
        result = simulate_strategies(
            200.0, 500.0, self.field, self.model, self.budget, 4000, 8
        )
        expected = mean_decoding_set_size(500.0, self.field, self.model, self.budget)
        self.assertLessEqual(
            abs(result.decoding_set_mean - expected), 4 * result.decoding_set_std_err
        )

    def test_no_relays_is_degenerate(self):
        field = RelayField(0.0, 300.0)
        with self.assertLogs("a2g_toolbox.monte_carlo", level="WARNING") as logs:
            estimate = simulate_outage(
                Strategy.RELAYING, 200.0, 500.0, field, self.model, self.budget, 500, 0
            )
        self.assertEqual(estimate.p_hat, 1.0)
        self.assertEqual(estimate.std_err, 0.0)
        self.assertIn("degenerate", logs.output[0])

    def test_invalid_settings(self):
        args = (Strategy.DIRECT, 200.0, 500.0, self.field, self.model, self.budget)
        with self.assertRaises(DomainError):
            simulate_outage(*args, 0, 1)
        with self.assertRaises(DomainError):
            simulate_outage(*args, 100, -1)
        with self.assertRaises(DomainError):
            simulate_outage(*args, 100, 1, block_size=0)

    def test_needs_explicit_disk(self):
        with self.assertRaises(DomainError):
            simulate_outage(
                Strategy.DIRECT,
                200.0,
                500.0,
                RelayField(3e-4),
                self.model,
                self.budget,
                100,
                1,
            )
