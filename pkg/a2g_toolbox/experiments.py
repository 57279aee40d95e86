"""Sweeps behind the command-line subcommands. Each returns a DataFrame whose
rows follow the input grid order."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from .channel_model import (
    HALF_PI,
    AlphaFit,
    LinkBudget,
    fitted_path_loss_exponent,
)
from .classes import (
    DomainError,
    ScenarioError,
    Strategy,
    SweepContextFilter,
    ValidationGateError,
)
from .direct_link import (
    config_space_point,
    optimal_altitude_dc,
    optimal_theta_numeric,
    outage_dc_grid,
)
from .monte_carlo import simulate_outage, simulate_strategies
from .relay_network import (
    QUADRATURE_ORDER,
    RelayField,
    PowerAllocation,
    compare_optima,
    compare_with_direct,
    coverage_radius,
    joint_optimum,
    outage_rc,
    outage_rc_lower_bound,
    strategy_outage,
)
from .yamlparsers import Scenario

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

Z_GATE = 5.0


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Applies fn to every item, returning results in input order. The current
    item index is published to any SweepContextFilter on the package logger."""
    items = list(items)
    filters = [
        f
        for handler in logging.getLogger("a2g_toolbox").handlers
        for f in handler.filters
        if isinstance(f, SweepContextFilter)
    ]

    def run(indexed):
        index, item = indexed
        for context in filters:
            context.curr_point = index
        try:
            return fn(item)
        finally:
            for context in filters:
                context.curr_point = None

    if workers <= 1:
        results = [run(pair) for pair in enumerate(items)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, enumerate(items)))

    return results


def resolve_field(
    field: RelayField,
    h: float,
    scenario: Scenario,
    budget: Optional[LinkBudget] = None,
    order: int = QUADRATURE_ORDER,
) -> RelayField:
    """Pins the disk of a self-consistent field to the relaying coverage radius
    at altitude h."""
    if not field.is_auto:
        return field
    budget = scenario.budget if budget is None else budget
    radius = coverage_radius(
        Strategy.RELAYING, h, field, scenario.propagation, budget, order=order
    )
    return field.with_disk(max(radius, 1.0))


def outage_curve(
    scenario: Scenario,
    r_d: float,
    heights: Sequence[float],
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
) -> pd.DataFrame:
    """Outage of every strategy, and the relaying lower bound, over altitude."""
    model, budget = scenario.propagation, scenario.budget
    heights = np.asarray(heights, dtype=float)
    direct = outage_dc_grid(r_d, heights, model, budget)

    def row(h):
        field = resolve_field(scenario.relay_field, h, scenario, order=order)
        return (
            outage_rc(r_d, h, field, model, budget, order),
            outage_rc_lower_bound(r_d, field, model, budget, order),
        )

    relayed = np.array(map_ordered(row, heights, workers))
    return pd.DataFrame(
        {
            "h": heights,
            "outage_dc": direct,
            "outage_rc": relayed[:, 0],
            "outage_rc_lb": relayed[:, 1],
            "outage_cc": direct * relayed[:, 0],
        }
    )


def optimal_altitude_table(
    scenario: Scenario,
    strategy: Strategy,
    r_values: Sequence[float],
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
    points: int = 64,
) -> pd.DataFrame:
    """Stationarity angle of the direct link next to the numeric optimum of
    the chosen strategy for each ground distance."""
    model, budget = scenario.propagation, scenario.budget

    def row(r_d):
        analytic = optimal_altitude_dc(r_d, model, budget)
        if strategy is Strategy.DIRECT:
            numeric = optimal_theta_numeric(
                r_d,
                lambda h: float(outage_dc_grid(r_d, [h], model, budget)[0]),
                points=points,
                model=model,
                budget=budget,
            )
        else:

            def outage(h):
                field = resolve_field(scenario.relay_field, h, scenario, order=order)
                return strategy_outage(strategy, r_d, h, field, model, budget, order)

            numeric = optimal_theta_numeric(r_d, outage, points=points)
        return analytic.theta_opt, numeric.theta_opt, numeric.h_opt

    rows = map_ordered(row, r_values, workers)
    frame = pd.DataFrame(
        rows, columns=["theta_opt_analytic", "theta_opt_numeric", "h_opt"]
    )
    frame.insert(0, "r_d", np.asarray(r_values, dtype=float))
    return frame


def config_space_table(
    scenario: Scenario,
    strategy: Strategy,
    thetas: Sequence[float],
    xis: Sequence[float],
    use_approx_inverse: bool = False,
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
) -> pd.DataFrame:
    """Points (r_c, h) where the outage equals epsilon, per SNR threshold.

    The direct link is traced along elevation angles. Relay-assisted strategies
    take the altitudes of the direct-link curve and solve for their own
    coverage radius there.
    """
    model = scenario.propagation
    jobs = [(xi, theta) for xi in xis for theta in thetas]

    def row(job):
        xi, theta = job
        budget = replace(scenario.budget, xi=xi)
        point = config_space_point(theta, model, budget, use_approx_inverse)
        if strategy is Strategy.DIRECT:
            return xi, point.theta_c, point.r_c, point.h
        r_c = coverage_radius(
            strategy, point.h, scenario.relay_field, model, budget, order=order
        )
        theta_c = float(np.arctan2(point.h, r_c)) if r_c > 0 else HALF_PI
        return xi, theta_c, r_c, point.h

    rows = map_ordered(row, jobs, workers)
    return pd.DataFrame(rows, columns=["xi", "theta_c", "r_c", "h"])


def power_sweep(
    scenario: Scenario,
    strategy: Strategy,
    heights: Sequence[float],
    rhos: Sequence[float],
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
    **optimum_kwargs,
) -> pd.DataFrame:
    """Coverage radius over an (h, rho) grid, followed by the joint optimum as
    the last row with ``is_optimum`` set."""
    model = scenario.propagation
    xi, epsilon = scenario.budget.xi, scenario.budget.epsilon
    total = scenario.total_budget_gamma
    jobs = [(h, rho) for h in heights for rho in rhos]

    def row(job):
        h, rho = job
        budget = PowerAllocation(rho, total).budget(xi, epsilon)
        r_c = coverage_radius(
            strategy, h, scenario.relay_field, model, budget, order=order
        )
        return h, rho, r_c, 0

    rows = map_ordered(row, jobs, workers)
    best = joint_optimum(
        strategy,
        total,
        scenario.relay_field,
        model,
        xi,
        epsilon,
        order=order,
        **optimum_kwargs,
    )
    logger.info(
        f"Joint optimum for {strategy.value}: h={best.h_opt:.1f} m,"
        f" rho={best.rho_opt:.3f}, r_c={best.r_c_max:.1f} m"
    )
    rows.append((best.h_opt, best.rho_opt, best.r_c_max, 1))
    return pd.DataFrame(rows, columns=["h", "rho", "r_c", "is_optimum"])


def power_saving_table(
    scenario: Scenario,
    strategy: Strategy,
    heights: Sequence[float],
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
    include_optimum: bool = True,
    h_points: int = 12,
    h_tol: float = 1e-3,
    **allocation_kwargs,
) -> pd.DataFrame:
    """Power saving and coverage gain of a relay-assisted strategy over the
    direct link, one row per altitude.

    With ``include_optimum`` a last row (``is_optimum`` set) compares the joint
    (h, rho) optimum against the direct link at its own best altitude: ``h``
    is the joint altitude, ``r_dc`` the best direct-link radius and
    ``power_saving`` is 1 - rho_opt.
    """
    model = scenario.propagation
    xi, epsilon = scenario.budget.xi, scenario.budget.epsilon
    total = scenario.total_budget_gamma

    def row(h):
        report = compare_with_direct(
            strategy,
            h,
            total,
            scenario.relay_field,
            model,
            xi,
            epsilon,
            order=order,
            **allocation_kwargs,
        )
        return (
            report.h,
            report.r_dc,
            report.rho_matching,
            report.power_saving,
            report.rho_opt,
            report.r_opt,
            report.coverage_gain,
            0,
        )

    rows = map_ordered(row, heights, workers)
    if include_optimum:
        best = compare_optima(
            strategy,
            total,
            scenario.relay_field,
            model,
            xi,
            epsilon,
            h_points=h_points,
            h_tol=h_tol,
            order=order,
            **allocation_kwargs,
        )
        rows.append(
            (
                best.h_opt,
                best.r_dc_max,
                np.nan,
                best.uav_power_saving,
                best.rho_opt,
                best.r_c_max,
                best.coverage_gain,
                1,
            )
        )
    return pd.DataFrame(
        rows,
        columns=[
            "h",
            "r_dc",
            "rho_matching",
            "power_saving",
            "rho_opt",
            "r_opt",
            "coverage_gain",
            "is_optimum",
        ],
    )


def _z_score(analytic: float, mc: float, std_err: float, n_trials: int) -> float:
    if std_err == 0.0:
        # all-or-nothing sample; fall back to the analytic spread
        std_err = np.sqrt(analytic * (1.0 - analytic) / n_trials)
    if std_err == 0.0:
        return 0.0 if mc == analytic else np.inf
    return (mc - analytic) / std_err


def validation_table(
    scenario: Scenario,
    r_values: Sequence[float],
    heights: Sequence[float],
    n_trials: int,
    seed: int,
    strategies: Sequence[Strategy] = tuple(Strategy),
    workers: int = 1,
    order: int = QUADRATURE_ORDER,
) -> pd.DataFrame:
    """Analytic outage next to its Monte Carlo estimate on an (r_d, h) grid.

    Each grid point is simulated once on the shared stream and every requested
    strategy is read off the same draws. Relays are only drawn when a relay
    strategy is requested. Rows are ordered by strategy, then r_d, then h.
    """
    model, budget = scenario.propagation, scenario.budget
    points = [(r_d, h) for r_d in r_values for h in heights]
    direct_only = all(s is Strategy.DIRECT for s in strategies)

    def simulate(point):
        r_d, h = point
        field = resolve_field(scenario.relay_field, h, scenario, order=order)
        if direct_only:
            estimates = {
                Strategy.DIRECT: simulate_outage(
                    Strategy.DIRECT,
                    r_d,
                    h,
                    field,
                    model,
                    budget,
                    n_trials,
                    seed,
                    block_size=scenario.mc.block_size,
                    shared=True,
                )
            }
        else:
            estimates = simulate_strategies(
                r_d,
                h,
                field,
                model,
                budget,
                n_trials,
                seed,
                block_size=scenario.mc.block_size,
            ).estimates

        rows = {}
        for strategy in strategies:
            analytic = strategy_outage(strategy, r_d, h, field, model, budget, order)
            estimate = estimates[strategy]
            if estimate.degenerate:
                logger.warning(
                    f"{strategy.value} estimate at r_d={r_d:g}, h={h:g} is"
                    f" {estimate.p_hat:g}; its standard error is degenerate."
                )
            z = _z_score(analytic, estimate.p_hat, estimate.std_err, n_trials)
            rows[strategy] = (
                strategy.value,
                r_d,
                h,
                analytic,
                estimate.p_hat,
                estimate.std_err,
                z,
            )
        return rows

    per_point = map_ordered(simulate, points, workers)
    rows = [by_strategy[s] for s in strategies for by_strategy in per_point]
    return pd.DataFrame(
        rows,
        columns=["strategy", "r_d", "h", "analytic", "mc", "std_err", "z_score"],
    )


def check_validation(frame: pd.DataFrame, threshold: float = Z_GATE) -> None:
    """Raises ValidationGateError if any |z| exceeds the threshold."""
    failed = frame[np.abs(frame["z_score"]) > threshold]
    if len(failed) > 0:
        worst = failed.loc[np.abs(failed["z_score"]).idxmax()]
        raise ValidationGateError(
            f"{len(failed)} of {len(frame)} points exceed |z| > {threshold:g};"
            f" worst is {worst['strategy']} at r_d={worst['r_d']:g},"
            f" h={worst['h']:g} with z={worst['z_score']:.2f}"
        )


def apply_alpha_fit(scenario: Scenario, fit: AlphaFit) -> Scenario:
    """Copy of the scenario whose path-loss endpoints reproduce the fitted
    exponent exactly."""
    model = scenario.propagation
    alpha0 = float(fitted_path_loss_exponent(0.0, fit.a1, fit.offset, model))
    alpha_half_pi = float(
        fitted_path_loss_exponent(HALF_PI, fit.a1, fit.offset, model)
    )
    try:
        fitted = replace(
            model, alpha0=alpha0, alpha_half_pi=alpha_half_pi, exact_fit=True
        )
    except DomainError as ex:
        raise ScenarioError(f"Fitted path-loss exponent is not usable: {ex}")
    return replace(scenario, propagation=fitted)
