import logging
import threading
from pathlib import Path
from unittest import TestCase

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from a2g_toolbox.channel_model import AlphaFit, fitted_path_loss_exponent
from a2g_toolbox.classes import (
    ScenarioError,
    Strategy,
    SweepContextFilter,
    ValidationGateError,
)
from a2g_toolbox.direct_link import coverage_radius_dc
from a2g_toolbox.experiments import (
    apply_alpha_fit,
    check_validation,
    config_space_table,
    map_ordered,
    optimal_altitude_table,
    outage_curve,
    power_saving_table,
    power_sweep,
    resolve_field,
    validation_table,
)
from a2g_toolbox.monte_carlo import simulate_strategies
from a2g_toolbox.relay_network import RelayField
from a2g_toolbox.yamlparsers import Scenario

data_dir = Path(__file__).parent / "test_data"

ORDER = 32


@pytest.fixture
def scenario():
    return Scenario.from_yaml_path(data_dir / "scenario.yaml")


class TestMapOrdered(TestCase):
    def test_keeps_input_order(self):
        items = list(range(40))
        squares = map_ordered(lambda x: x * x, items, workers=4)
        self.assertEqual(squares, [x * x for x in items])

    def test_publishes_point_index(self):
        context = SweepContextFilter()
        handler = logging.NullHandler()
        handler.addFilter(context)
        package_logger = logging.getLogger("a2g_toolbox")
        package_logger.addHandler(handler)
        try:
            seen = map_ordered(lambda item: context.curr_point, "abcdef", workers=3)
        finally:
            package_logger.removeHandler(handler)
        self.assertEqual(seen, list(range(6)))
        self.assertIsNone(context.curr_point)

    def test_point_is_thread_local(self):
        context = SweepContextFilter()
        context.curr_point = 3
        other = []
        thread = threading.Thread(target=lambda: other.append(context.curr_point))
        thread.start()
        thread.join()
        self.assertEqual(other, [None])

    def test_filter_stamps_point(self):
        context = SweepContextFilter()
        record = logging.makeLogRecord({"msg": "solving"})
        self.assertTrue(context.filter(record))
        self.assertEqual(record.point, "-")
        context.curr_point = 7
        context.filter(record)
        self.assertEqual(record.point, 7)


class TestResolveField:
    def test_explicit_disk_is_kept(self, scenario):
        field = scenario.relay_field
        assert resolve_field(field, 500.0, scenario) is field

    def test_empty_self_consistent_disk(self, scenario):
        resolved = resolve_field(RelayField(0.0), 500.0, scenario)
        assert resolved.disk_radius == 1.0


class TestTables:
    def test_outage_curve(self, scenario):
        heights = scenario.sweep.values()
        frame = outage_curve(scenario, 200.0, heights, order=ORDER)
        assert list(frame.columns) == [
            "h",
            "outage_dc",
            "outage_rc",
            "outage_rc_lb",
            "outage_cc",
        ]
        assert_allclose(frame["h"], heights)
        assert_allclose(frame["outage_cc"], frame["outage_dc"] * frame["outage_rc"])
        assert np.all(frame["outage_rc_lb"] <= frame["outage_rc"] * (1 + 1e-9))

    def test_outage_curve_independent_of_workers(self, scenario):
        heights = scenario.sweep.values()
        serial = outage_curve(scenario, 200.0, heights, order=ORDER)
        threaded = outage_curve(scenario, 200.0, heights, workers=3, order=ORDER)
        pd.testing.assert_frame_equal(serial, threaded)

    def test_optimal_altitude_direct(self, scenario):
        frame = optimal_altitude_table(scenario, Strategy.DIRECT, [500.0, 1000.0])
        assert_allclose(frame["r_d"], [500.0, 1000.0])
        assert np.all(
            np.abs(frame["theta_opt_analytic"] - frame["theta_opt_numeric"])
            <= np.radians(2.0)
        )
        expected_h = frame["r_d"] * np.tan(frame["theta_opt_numeric"])
        assert_allclose(frame["h_opt"], expected_h)

    def test_config_space_direct(self, scenario):
        thetas = np.linspace(0.1, 1.4, 5)
        xis = [scenario.budget.xi, 10 * scenario.budget.xi]
        frame = config_space_table(scenario, Strategy.DIRECT, thetas, xis)
        assert len(frame) == 10
        assert_allclose(frame["theta_c"][:5], thetas)
        # a higher threshold pulls the whole curve inwards
        assert np.all(frame["r_c"][5:].values < frame["r_c"][:5].values)
        assert np.all(frame["h"][5:].values < frame["h"][:5].values)

    def test_config_space_cooperative(self, scenario):
        thetas = np.linspace(0.3, 1.2, 3)
        frame = config_space_table(
            scenario, Strategy.COOPERATIVE, thetas, [scenario.budget.xi], order=ORDER
        )
        for _, row in frame.iterrows():
            r_dc = coverage_radius_dc(row["h"], scenario.propagation, scenario.budget)
            assert row["r_c"] >= r_dc - 1e-4

    def test_power_sweep_direct(self, scenario):
        frame = power_sweep(
            scenario,
            Strategy.DIRECT,
            [300.0, 800.0],
            [0.5, 0.999],
            order=ORDER,
            h_points=6,
            grid_points=3,
        )
        assert list(frame["is_optimum"]) == [0, 0, 0, 0, 1]
        grid = frame[frame["is_optimum"] == 0]
        for h in (300.0, 800.0):
            radii = grid[grid["h"] == h]["r_c"].values
            assert radii[1] > radii[0]
        assert frame["r_c"].iloc[-1] >= grid["r_c"].max() * (1 - 1e-3)

    def test_power_saving_cooperative(self, scenario):
        frame = power_saving_table(
            scenario,
            Strategy.COOPERATIVE,
            [300.0, 800.0],
            order=16,
            h_points=4,
            h_tol=5e-2,
            grid_points=4,
            rho_tol=5e-2,
        )
        assert list(frame.columns) == [
            "h",
            "r_dc",
            "rho_matching",
            "power_saving",
            "rho_opt",
            "r_opt",
            "coverage_gain",
            "is_optimum",
        ]
        assert list(frame["is_optimum"]) == [0, 0, 1]
        assert_allclose(frame["h"][:2], [300.0, 800.0])
        for _, row in frame[frame["is_optimum"] == 0].iterrows():
            if np.isnan(row["rho_matching"]):
                assert row["coverage_gain"] < 0.0
            else:
                assert row["coverage_gain"] >= 0.0
                assert_allclose(row["power_saving"], 1.0 - row["rho_matching"])
                assert row["rho_matching"] <= row["rho_opt"] + 1e-9
        best = frame.iloc[-1]
        assert np.isnan(best["rho_matching"])
        assert_allclose(best["power_saving"], 1.0 - best["rho_opt"])


class TestValidation(TestCase):
    def setUp(self):
        self.scenario = Scenario.from_yaml_path(data_dir / "scenario.yaml")

    def test_small_validation_passes(self):
        frame = validation_table(
            self.scenario, [200.0], [500.0], 4000, 5, order=ORDER
        )
        self.assertEqual(list(frame["strategy"]), ["dc", "rc", "cc"])
        self.assertTrue(np.all(np.isfinite(frame["z_score"])))
        check_validation(frame)

    def test_strategies_share_one_run_per_point(self):
        frame = validation_table(
            self.scenario, [150.0, 250.0], [500.0], 1500, 11, order=ORDER
        )
        self.assertEqual(
            list(zip(frame["strategy"], frame["r_d"])),
            [(s.value, r_d) for s in Strategy for r_d in (150.0, 250.0)],
        )
        field = self.scenario.relay_field
        for r_d in (150.0, 250.0):
            result = simulate_strategies(
                r_d,
                500.0,
                field,
                self.scenario.propagation,
                self.scenario.budget,
                1500,
                11,
                block_size=self.scenario.mc.block_size,
            )
            for strategy in Strategy:
                mask = (frame["strategy"] == strategy.value) & (frame["r_d"] == r_d)
                row = frame[mask]
                self.assertEqual(row["mc"].item(), result.estimates[strategy].p_hat)

    def test_direct_only_matches_shared_run(self):
        frame = validation_table(
            self.scenario,
            [200.0],
            [500.0],
            1500,
            11,
            strategies=[Strategy.DIRECT],
            order=ORDER,
        )
        full = validation_table(self.scenario, [200.0], [500.0], 1500, 11, order=ORDER)
        self.assertEqual(len(frame), 1)
        self.assertEqual(frame["mc"].item(), full["mc"].iloc[0])

    def test_gate(self):
        frame = pd.DataFrame(
            {
                "strategy": ["dc", "rc"],
                "r_d": [200.0, 400.0],
                "h": [500.0, 500.0],
                "analytic": [0.1, 0.2],
                "mc": [0.1, 0.3],
                "std_err": [0.01, 0.01],
                "z_score": [0.0, 10.0],
            }
        )
        with self.assertRaises(ValidationGateError) as ex:
            check_validation(frame)
        self.assertIn("1 of 2", str(ex.exception))
        self.assertIn("rc at r_d=400", str(ex.exception))


class TestApplyAlphaFit(TestCase):
    def setUp(self):
        self.scenario = Scenario.from_yaml_path(data_dir / "scenario.yaml")

    def test_endpoints_follow_fit(self):
        fit = AlphaFit(a1=-0.8, offset=2.9)
        fitted = apply_alpha_fit(self.scenario, fit).propagation
        model = self.scenario.propagation
        assert_allclose(
            fitted.alpha0, fitted_path_loss_exponent(0.0, -0.8, 2.9, model)
        )
        self.assertTrue(fitted.exact_fit)
        self.assertEqual(fitted.kappa0, model.kappa0)

    def test_unusable_fit(self):
        with self.assertRaises(ScenarioError):
            apply_alpha_fit(self.scenario, AlphaFit(a1=-0.8, offset=2.5))
