"""Direct UAV-to-destination link: outage, optimal altitude for a given ground
distance, the coverage configuration curve and its maximum-coverage angle."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .channel_model import (
    HALF_PI,
    Geometry,
    LinkBudget,
    PropagationModel,
    air_to_ground_outage,
    derivatives,
    path_loss_exponent,
    rician_factor,
)
from .classes import DomainError, NoRootError
from .optimize import find_root, minimize_on_grid, solve_increasing
from .special_functions import (
    bessel_ratio,
    inv_gaussian_q,
    inv_marcum_q_approx,
    inv_marcum_q_exact,
)

logger = logging.getLogger(__name__)

THETA_MARGIN = 1e-4
COVERAGE_GRID_POINTS = 512
_COVERAGE_LIMIT = 1e9


@dataclass(frozen=True)
class OptimumAltitude:
    """Altitude that minimizes outage for a fixed ground distance.

    Attributes
    ----------
    theta_opt : float
        Elevation angle at the optimum, radians.
    h_opt : float
        Optimal altitude, meters.
    outage_at_opt : float
        Outage probability at the optimum.
    method : str
        "stationarity" for the stationarity root, "numeric" for the grid search.
    rician_factor : float
        K at theta_opt.
    xy : float
        Product of the Marcum arguments at theta_opt. The stationarity
        condition assumes both K and xy are large.
    unimodal : bool
        False if the numeric search saw more than one local minimum.
    """

    theta_opt: float
    h_opt: float
    outage_at_opt: float
    method: str
    rician_factor: float
    xy: float
    unimodal: bool = True


@dataclass(frozen=True)
class ConfigSpacePoint:
    theta_c: float
    lambda_radius: float
    h: float
    r_c: float
    x_c: float
    y_c: float


@dataclass(frozen=True)
class CoverageOptimum:
    theta_opt: float
    h_opt: float
    r_c_max: float
    method: str


@dataclass(frozen=True)
class ScalingReport:
    """Measured altitude/radius scaling between two budgets.

    ``h_exponent`` and ``r_exponent`` are log(ratio of results) divided by
    log(ratio of gamma_u / xi); they are NaN when the two budgets share the
    same ratio.
    """

    theta_a: float
    theta_b: float
    h_ratio: float
    r_ratio: float
    budget_ratio: float
    h_exponent: float
    r_exponent: float
    predicted_exponent: float


def outage_dc(geom: Geometry, model: PropagationModel, budget: LinkBudget) -> float:
    """Outage probability of the direct link.

    Parameters
    ----------
    geom : Geometry
    model : PropagationModel
    budget : LinkBudget

    Returns
    -------
    float
        1 - Q1(sqrt(2K), sqrt(2 xi (1 + K) ell^alpha / gamma_u)) evaluated at
        the elevation angle and length of ``geom``.
    """
    return float(
        air_to_ground_outage(geom.r_d, geom.h, model, budget.xi, budget.gamma_u)
    )


def _marcum_product(theta: float, ell: float, model, budget) -> float:
    k = rician_factor(theta, model)
    alpha = path_loss_exponent(theta, model)
    y = np.sqrt(2.0 * budget.xi * (1.0 + k) * ell**alpha / budget.gamma_u)
    return float(np.sqrt(2.0 * k) * y)


def outage_dc_stationarity_residual(
    theta: float, r_d: float, model: PropagationModel, budget: LinkBudget
) -> float:
    """Stationarity residual of the direct-link outage in theta at fixed r_d."""
    ell = r_d / np.cos(theta)
    alpha = path_loss_exponent(theta, model)
    _, alpha_prime, _ = derivatives(theta, model)
    k_log_slope = model.b3

    scale = np.sqrt(budget.xi / budget.gamma_u * ell**alpha)
    bracket = k_log_slope + alpha_prime * np.log(ell) + alpha * np.tan(theta)
    return float(scale * bracket - k_log_slope)


def optimal_theta_dc(
    r_d: float, model: PropagationModel, budget: LinkBudget
) -> OptimumAltitude:
    """Elevation angle solving the direct-link stationarity condition.

    Raises
    ------
    NoRootError
        Raised if the residual has no sign change on
        [THETA_MARGIN, pi/2 - THETA_MARGIN].
    """
    if not r_d > 0:
        raise DomainError(f"r_d must be positive, got {r_d}")

    theta = find_root(
        lambda t: outage_dc_stationarity_residual(t, r_d, model, budget),
        THETA_MARGIN,
        HALF_PI - THETA_MARGIN,
    )
    h_opt = r_d * np.tan(theta)
    geom = Geometry(r_d, h_opt)
    k = rician_factor(theta, model)
    xy = _marcum_product(theta, geom.ell_ud, model, budget)
    logger.debug(
        f"Stationary angle {np.degrees(theta):.3f} deg at r_d={r_d:g}: K={k:.3g},"
        f" xy={xy:.3g}, I1/I0={bessel_ratio(xy):.6f}"
    )
    return OptimumAltitude(
        theta_opt=theta,
        h_opt=h_opt,
        outage_at_opt=outage_dc(geom, model, budget),
        method="stationarity",
        rician_factor=k,
        xy=xy,
    )


def optimal_theta_numeric(
    r_d: float,
    outage_fn: Callable[[float], float],
    h_min: float = 1.0,
    h_max: Optional[float] = None,
    points: int = 64,
    xtol: float = 1e-5,
    model: Optional[PropagationModel] = None,
    budget: Optional[LinkBudget] = None,
) -> OptimumAltitude:
    """Minimizes ``outage_fn(h)`` over a log-spaced altitude grid with
    golden-section refinement in log(h).

    Parameters
    ----------
    r_d : float
        Ground distance, used for the default search range and the angle.
    outage_fn : Callable[[float], float]
        Outage probability as a function of altitude.
    h_min, h_max : float
        Search range, defaulting to [1 m, 50 r_d].
    points : int
        Number of grid points.
    xtol : float
        Relative tolerance of the golden search in log(h).
    model, budget : optional
        If given, the regime diagnostics of the direct link are filled in.

    Returns
    -------
    OptimumAltitude
    """
    if h_max is None:
        h_max = 50.0 * r_d
    grid = np.linspace(np.log(h_min), np.log(h_max), points)
    result = minimize_on_grid(lambda u: outage_fn(np.exp(u)), grid, xtol=xtol)

    h_opt = float(np.exp(result.x))
    theta = float(np.arctan2(h_opt, r_d))
    k, xy = np.nan, np.nan
    if model is not None and budget is not None:
        k = rician_factor(theta, model)
        xy = _marcum_product(theta, np.hypot(r_d, h_opt), model, budget)

    return OptimumAltitude(
        theta_opt=theta,
        h_opt=h_opt,
        outage_at_opt=float(result.value),
        method="numeric",
        rician_factor=k,
        xy=xy,
        unimodal=result.unimodal,
    )


def optimal_altitude_dc(
    r_d: float, model: PropagationModel, budget: LinkBudget, **numeric_kwargs
) -> OptimumAltitude:
    """Stationarity root when it exists, grid search otherwise."""
    try:
        return optimal_theta_dc(r_d, model, budget)
    except NoRootError:
        logger.warning(
            f"No stationary angle at r_d={r_d:g}; falling back to a numeric search."
        )

    def outage_fn(h):
        return outage_dc(Geometry(r_d, h), model, budget)

    return optimal_theta_numeric(
        r_d, outage_fn, model=model, budget=budget, **numeric_kwargs
    )


def config_space_point(
    theta_c: float,
    model: PropagationModel,
    budget: LinkBudget,
    use_approx_inverse: bool = False,
) -> ConfigSpacePoint:
    """Point of the configuration curve at elevation angle theta_c, where the
    direct-link outage equals budget.epsilon.

    Parameters
    ----------
    theta_c : float
        Elevation angle in [0, pi/2].
    model : PropagationModel
    budget : LinkBudget
    use_approx_inverse : bool
        Use the closed-form inverse Marcum approximation instead of the exact
        numerical inverse.

    Returns
    -------
    ConfigSpacePoint
    """
    k = rician_factor(theta_c, model)
    alpha = path_loss_exponent(theta_c, model)
    x_c = float(np.sqrt(2.0 * k))
    if use_approx_inverse:
        y_c = inv_marcum_q_approx(x_c, budget.epsilon)
    else:
        y_c = inv_marcum_q_exact(x_c, 1.0 - budget.epsilon)

    radius = (budget.gamma_u * y_c**2 / (budget.xi * (2.0 + x_c**2))) ** (1.0 / alpha)

    theta_c = float(theta_c)
    h = 0.0 if theta_c == 0.0 else radius * np.sin(theta_c)
    r_c = 0.0 if theta_c >= HALF_PI else radius * np.cos(theta_c)
    return ConfigSpacePoint(theta_c, float(radius), float(h), float(r_c), x_c, y_c)


def coverage_radius_dc(
    h: float, model: PropagationModel, budget: LinkBudget, xtol: float = 1e-9
) -> float:
    """Ground distance at which the direct-link outage reaches epsilon.

    Returns 0 if the outage already exceeds epsilon directly below the UAV.
    """
    if h < 0:
        raise DomainError(f"h must be nonnegative, got {h}")

    def outage(r):
        return float(air_to_ground_outage(r, h, model, budget.xi, budget.gamma_u))

    lo = 0.0 if h > 0 else 1e-9
    r_c = solve_increasing(
        outage, budget.epsilon, lo, max(h, 100.0), _COVERAGE_LIMIT, xtol=xtol
    )
    return 0.0 if r_c == lo else r_c


def _large_k_radius(theta, model, budget, q_inv):
    k = rician_factor(theta, model)
    alpha = path_loss_exponent(theta, model)
    x = np.sqrt(2.0 * k)
    ratio = budget.gamma_u * (x - q_inv) ** 2 / (budget.xi * x**2)
    return ratio ** (1.0 / alpha)


def coverage_angle_residual(
    theta: float, model: PropagationModel, budget: LinkBudget
) -> float:
    """Stationarity residual of the large-K coverage radius in theta."""
    q_inv = inv_gaussian_q(budget.epsilon)
    k = rician_factor(theta, model)
    x = np.sqrt(2.0 * k)
    if x <= q_inv:
        return np.nan

    alpha = path_loss_exponent(theta, model)
    _, alpha_prime, x_prime = derivatives(theta, model)
    radius = _large_k_radius(theta, model, budget, q_inv)

    lhs = alpha * np.tan(theta) + alpha_prime * np.log(radius)
    rhs = 2.0 * x_prime * q_inv / (x * (x - q_inv))
    return float(lhs - rhs)


def _coverage_by_grid(model, budget, use_approx_inverse, points):
    thetas = np.linspace(0.0, HALF_PI, points)
    curve = [config_space_point(t, model, budget, use_approx_inverse) for t in thetas]
    best = max(curve, key=lambda point: point.r_c)
    return CoverageOptimum(best.theta_c, best.h, best.r_c, "grid")


def optimal_theta_coverage(
    model: PropagationModel,
    budget: LinkBudget,
    use_approx_inverse: bool = False,
    grid_points: int = COVERAGE_GRID_POINTS,
) -> CoverageOptimum:
    """Elevation angle maximizing the direct-link coverage radius.

    The angle comes from the large-K stationarity condition; altitude and
    radius are then read off the configuration curve at that angle. If the
    condition has no root, the exact curve is maximized on a grid instead.
    """
    try:
        theta = find_root(
            lambda t: coverage_angle_residual(t, model, budget),
            THETA_MARGIN,
            HALF_PI - THETA_MARGIN,
        )
    except NoRootError:
        logger.warning(
            "Coverage stationarity condition has no root; maximizing the"
            " configuration curve on a grid."
        )
        return _coverage_by_grid(model, budget, use_approx_inverse, grid_points)

    point = config_space_point(theta, model, budget, use_approx_inverse)
    return CoverageOptimum(theta, point.h, point.r_c, "stationarity")


def scaling_check(
    model: PropagationModel, budget_a: LinkBudget, budget_b: LinkBudget
) -> ScalingReport:
    """Compares the coverage optima of two budgets that share epsilon."""
    if budget_a.epsilon != budget_b.epsilon:
        raise DomainError("Budgets must share the same epsilon.")

    opt_a = optimal_theta_coverage(model, budget_a)
    opt_b = optimal_theta_coverage(model, budget_b)

    ratio_a = budget_a.gamma_u / budget_a.xi
    ratio_b = budget_b.gamma_u / budget_b.xi
    budget_ratio = ratio_b / ratio_a
    h_ratio = opt_b.h_opt / opt_a.h_opt
    r_ratio = opt_b.r_c_max / opt_a.r_c_max

    log_budget = np.log(budget_ratio)
    if abs(log_budget) < 1e-12:
        h_exponent = r_exponent = np.nan
    else:
        h_exponent = np.log(h_ratio) / log_budget
        r_exponent = np.log(r_ratio) / log_budget

    return ScalingReport(
        theta_a=opt_a.theta_opt,
        theta_b=opt_b.theta_opt,
        h_ratio=float(h_ratio),
        r_ratio=float(r_ratio),
        budget_ratio=float(budget_ratio),
        h_exponent=float(h_exponent),
        r_exponent=float(r_exponent),
        predicted_exponent=float(1.0 / path_loss_exponent(opt_a.theta_opt, model)),
    )


def scaling_regression(
    model: PropagationModel,
    budget: LinkBudget,
    factors: Sequence[float] = (1.0, 10.0, 100.0, 1000.0, 10000.0),
) -> float:
    """Slope of log(h_opt) against log(gamma_u / xi) over scaled budgets."""
    factors = np.asarray(factors, dtype=float)
    heights = [
        optimal_theta_coverage(
            model,
            LinkBudget(
                budget.gamma_u * factor, budget.gamma_r, budget.xi, budget.epsilon
            ),
        ).h_opt
        for factor in factors
    ]
    slope, _ = np.polyfit(np.log(factors), np.log(heights), 1)
    return float(slope)


def outage_dc_grid(
    r_d: float, heights: Sequence[float], model: PropagationModel, budget: LinkBudget
) -> np.ndarray:
    """Direct-link outage over an altitude grid at fixed r_d."""
    heights = np.asarray(heights, dtype=float)
    return np.asarray(
        air_to_ground_outage(r_d, heights, model, budget.xi, budget.gamma_u)
    )
