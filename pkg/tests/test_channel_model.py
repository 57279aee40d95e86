from dataclasses import FrozenInstanceError
from unittest import TestCase

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from a2g_toolbox.channel_model import (
    HALF_PI,
    SPEED_OF_LIGHT,
    Geometry,
    LinkBudget,
    PropagationModel,
    air_to_ground_outage,
    air_to_ground_success,
    budget_from_physical,
    db_to_linear,
    derivatives,
    fit_alpha_from_pl_model,
    fitted_path_loss_exponent,
    ground_to_ground_outage,
    linear_to_db,
    p_los,
    path_loss_exponent,
    rician_factor,
    rician_fading_cdf,
    rician_fading_pdf,
)
from a2g_toolbox.classes import DomainError


class TestPropagationModel(TestCase):
    def setUp(self):
        self.model = PropagationModel.case_study()

    def test_case_study_values(self):
        assert_allclose(self.model.kappa0, 10**0.5)
        assert_allclose(self.model.kappa_half_pi, 10**1.5)
        self.assertEqual(self.model.alpha0, 3.5)
        self.assertEqual(self.model.alpha_half_pi, 2.0)
        assert_allclose(self.model.a2, 44.7193, rtol=1e-5)
        assert_allclose(self.model.b2, 9.16732, rtol=1e-5)

    def test_constructor_defaults(self):
        model = PropagationModel(1.0, 10.0, 3.0, 2.0)
        self.assertEqual((model.a2, model.b2), (10.0, 3.0))
        assert_allclose(p_los(0.0, model), 1 / 11)
        assert_allclose(p_los(HALF_PI, model), 0.91757, atol=1e-4)

    def test_rician_factor_endpoints_are_exact(self):
        self.assertEqual(rician_factor(0.0, self.model), self.model.kappa0)
        self.assertEqual(rician_factor(HALF_PI, self.model), self.model.kappa_half_pi)

    def test_path_loss_endpoints_exact_fit(self):
        assert_allclose(path_loss_exponent(0.0, self.model), 3.5, rtol=1e-12)
        assert_allclose(path_loss_exponent(HALF_PI, self.model), 2.0, rtol=1e-12)

    def test_path_loss_endpoints_approximate_fit(self):
        model = PropagationModel.from_db(5.0, 15.0, 3.5, 2.0, exact_fit=False)
        self.assertEqual(model.a1, -1.5)
        self.assertEqual(model.b1, 3.5)
        # the approximate fit misses the endpoints by the LoS probability span
        self.assertGreater(abs(path_loss_exponent(0.0, model) - 3.5), 0.1)

    def test_monotone_in_angle(self):
        theta = np.linspace(0, HALF_PI, 200)
        self.assertTrue(np.all(np.diff(rician_factor(theta, self.model)) > 0))
        self.assertTrue(np.all(np.diff(path_loss_exponent(theta, self.model)) < 0))
        self.assertTrue(np.all(np.diff(p_los(theta, self.model)) > 0))

    def test_derivatives_match_finite_differences(self):
        step = 1e-6
        for theta in np.linspace(0.05, HALF_PI - 0.05, 9):
            result = derivatives(theta, self.model)
            k_fd = (
                rician_factor(theta + step, self.model)
                - rician_factor(theta - step, self.model)
            ) / (2 * step)
            alpha_fd = (
                path_loss_exponent(theta + step, self.model)
                - path_loss_exponent(theta - step, self.model)
            ) / (2 * step)
            x_fd = (
                np.sqrt(2 * rician_factor(theta + step, self.model))
                - np.sqrt(2 * rician_factor(theta - step, self.model))
            ) / (2 * step)
            assert_allclose(result.k_prime, k_fd, rtol=1e-6)
            assert_allclose(result.alpha_prime, alpha_fd, rtol=1e-6)
            assert_allclose(result.x_prime, x_fd, rtol=1e-6)

    def test_angle_out_of_range(self):
        with self.assertRaises(DomainError):
            rician_factor(-0.1, self.model)
        with self.assertRaises(DomainError):
            p_los(2.0, self.model)
        with self.assertRaises(DomainError):
            path_loss_exponent(np.nan, self.model)

    def test_invalid_parameters(self):
        with self.assertRaises(DomainError) as ex:
            PropagationModel.from_db(15.0, 5.0, 3.5, 2.0)
        self.assertIn("kappa_half_pi", str(ex.exception))
        with self.assertRaises(DomainError):
            PropagationModel.from_db(5.0, 15.0, 3.5, 1.5)
        with self.assertRaises(DomainError):
            PropagationModel.from_db(5.0, 15.0, 2.0, 3.5)
        with self.assertRaises(DomainError):
            PropagationModel.from_db(5.0, 15.0, 3.5, 2.0, b2=0.0)

    def test_frozen(self):
        with self.assertRaises(FrozenInstanceError):
            self.model.alpha0 = 4.0


class TestLinkBudget(TestCase):
    def test_case_study(self):
        budget = LinkBudget.case_study()
        assert_allclose(budget.gamma_u, 10**7.5)
        assert_allclose(budget.xi, 10**0.4)
        self.assertEqual(budget.epsilon, 0.1)

    def test_invalid(self):
        with self.assertRaises(DomainError) as ex:
            LinkBudget(1e7, 1e7, 0.025, 1.5)
        self.assertIn("epsilon", str(ex.exception))
        with self.assertRaises(DomainError):
            LinkBudget(-1.0, 1e7, 0.025, 0.1)
        with self.assertRaises(DomainError):
            LinkBudget(1e7, 1e7, np.inf, 0.1)

    def test_budget_from_physical(self):
        assert_allclose(budget_from_physical(0.0, 30.0, 30.0), 1.0)
        assert_allclose(budget_from_physical(-40.0, 20.0, -100.0), 1e8)

    def test_db_conversions(self):
        assert_allclose(db_to_linear(-16.0), 0.025118864315095794)
        assert_allclose(linear_to_db(db_to_linear(7.3)), 7.3)


class TestGeometry(TestCase):
    def test_angle_and_distance(self):
        geom = Geometry(1000.0, 1000.0)
        assert_allclose(geom.theta_d, np.pi / 4)
        assert_allclose(geom.ell_ud, np.sqrt(2) * 1000)
        self.assertEqual(Geometry(0.0, 10.0).theta_d, HALF_PI)
        self.assertEqual(Geometry(10.0, 0.0).theta_d, 0.0)

    def test_invalid(self):
        with self.assertRaises(DomainError):
            Geometry(0.0, 0.0)
        with self.assertRaises(DomainError):
            Geometry(-5.0, 10.0)
        with self.assertRaises(DomainError):
            Geometry(np.nan, 10.0)


@pytest.fixture(params=[0.0, 1.0, 10**0.5, 10**1.5])
def k_factor(request):
    return request.param


class TestRicianFading:
    def test_cdf_endpoints(self, k_factor):
        assert rician_fading_cdf(0.0, k_factor) == 0.0
        assert rician_fading_cdf(40.0, k_factor) > 1 - 1e-12

    def test_cdf_monotone(self, k_factor):
        omega = np.linspace(0, 5, 101)
        assert np.all(np.diff(rician_fading_cdf(omega, k_factor)) >= 0)

    def test_pdf_is_unit_mean_density(self, k_factor):
        def pdf(w):
            return rician_fading_pdf(w, k_factor)

        mass, _ = integrate.quad(pdf, 0, 40, points=[1.0], limit=200)
        mean, _ = integrate.quad(lambda w: w * pdf(w), 0, 40, points=[1.0], limit=200)
        assert_allclose(mass, 1.0, atol=1e-8)
        assert_allclose(mean, 1.0, atol=1e-8)

    def test_pdf_is_cdf_derivative(self, k_factor):
        omega = np.linspace(0.2, 3.0, 15)
        step = 1e-6
        slope = (
            rician_fading_cdf(omega + step, k_factor)
            - rician_fading_cdf(omega - step, k_factor)
        ) / (2 * step)
        assert_allclose(
            rician_fading_pdf(omega, k_factor), slope, rtol=1e-5, atol=1e-8
        )


def test_rayleigh_cdf():
    omega = np.linspace(0, 6, 25)
    assert_allclose(rician_fading_cdf(omega, 0.0), -np.expm1(-omega), atol=1e-14)


class TestLinkOutage(TestCase):
    def setUp(self):
        self.model = PropagationModel.case_study()
        self.budget = LinkBudget.case_study()

    def test_success_and_outage_sum_to_one(self):
        r = np.array([100.0, 1000.0, 3000.0])
        h = np.array([50.0, 800.0, 10.0])
        args = (self.model, self.budget.xi, self.budget.gamma_u)
        total = air_to_ground_success(r, h, *args) + air_to_ground_outage(r, h, *args)
        assert_allclose(total, 1.0, atol=1e-13)

    def test_ground_link_is_zero_altitude_air_link(self):
        distances = np.array([50.0, 500.0, 2000.0])
        args = (self.model, self.budget.xi, self.budget.gamma_r)
        assert_allclose(
            ground_to_ground_outage(distances, *args),
            air_to_ground_outage(distances, 0.0, *args),
            rtol=1e-9,
        )

    def test_ground_outage_grows_with_distance(self):
        distances = np.geomspace(10, 5000, 40)
        outage = ground_to_ground_outage(
            distances, self.model, self.budget.xi, self.budget.gamma_r
        )
        self.assertTrue(np.all(np.diff(outage) >= 0))
        self.assertLess(outage[0], 1e-3)
        self.assertGreater(outage[-1], 0.5)


class TestFitAlpha(TestCase):
    def setUp(self):
        self.freq = 2e9
        self.a_db = 20 * np.log10(4 * np.pi * self.freq / SPEED_OF_LIGHT)

    def test_single_distance(self):
        fit = fit_alpha_from_pl_model(self.freq, 1.0, 20.0, self.a_db, [100.0])
        assert_allclose(fit.a1, -0.95)
        assert_allclose(fit.offset, 3.0)

    def test_averages_over_distances(self):
        fit = fit_alpha_from_pl_model(self.freq, 1.0, 20.0, self.a_db, [100.0, 1000.0])
        assert_allclose(fit.a1, -0.5 * (19 / 20 + 19 / 30))
        assert_allclose(fit.offset, 0.5 * (60 / 20 + 80 / 30))

    def test_fitted_exponent_decreases_with_angle(self):
        model = PropagationModel.case_study()
        fit = fit_alpha_from_pl_model(self.freq, 1.0, 20.0, self.a_db, [100.0])
        alpha = fitted_path_loss_exponent(np.linspace(0, HALF_PI, 20), *fit, model)
        self.assertTrue(np.all(np.diff(alpha) < 0))
        assert_allclose(alpha[0], -0.95 * p_los(0.0, model) + 3.0)
        assert_allclose(alpha[-1], -0.95 * p_los(HALF_PI, model) + 3.0)

    def test_invalid(self):
        with self.assertRaises(DomainError):
            fit_alpha_from_pl_model(self.freq, 1.0, 20.0, self.a_db, [1.0, 100.0])
        with self.assertRaises(DomainError):
            fit_alpha_from_pl_model(0.0, 1.0, 20.0, self.a_db, [100.0])
        with self.assertRaises(DomainError):
            fit_alpha_from_pl_model(self.freq, 1.0, 20.0, self.a_db, [])
