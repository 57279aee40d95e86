"""Decode-and-forward relaying over a Poisson field of ground relays.

The relays live in a disk centred on the UAV projection. A relay joins the
decoding set if it hears the UAV, and the destination is served if any member
of the decoding set reaches it. Integrals over the disk use scipy's adaptive
quadrature in one dimension and a tensor Gauss-Legendre rule in two. Every
two-dimensional rule is checked against a finer one and escalated with a warning
when the two disagree; pass ``verify=False`` to skip the check.
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize

from .channel_model import (
    Geometry,
    LinkBudget,
    PropagationModel,
    air_to_ground_success,
    ground_to_ground_outage,
)
from .classes import ConvergenceError, DomainError, Strategy
from .direct_link import (
    config_space_point,
    coverage_radius_dc,
    optimal_theta_coverage,
    outage_dc,
)
from .optimize import maximize_on_grid, solve_increasing

logger = logging.getLogger(__name__)

QUADRATURE_ORDER = 96
# the check rule is a third finer than the working rule, so 96 is checked at 128
CHECK_RATIO = 4 / 3
QUADRATURE_RTOL = 1e-6
RHO_BOUNDS = (0.05, 0.999)
FIXED_POINT_TOL = 0.5
FIXED_POINT_MAXITER = 50
FIXED_POINT_XTOL = 1e-4
_RADIUS_LIMIT = 1e8


@dataclass(frozen=True)
class RelayField:
    """Poisson field of ground relays.

    Attributes
    ----------
    density : float
        Relays per square meter.
    disk_radius : Optional[float]
        Radius of the relay disk in meters. None selects the self-consistent
        mode, where the disk is the coverage disk itself.
    """

    density: float
    disk_radius: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.density) and self.density >= 0):
            raise DomainError(f"density must be nonnegative, got {self.density}")
        if self.disk_radius is not None and not (
            np.isfinite(self.disk_radius) and self.disk_radius > 0
        ):
            raise DomainError(f"disk_radius must be positive, got {self.disk_radius}")

    @property
    def is_auto(self) -> bool:
        return self.disk_radius is None

    def require_disk(self) -> float:
        if self.disk_radius is None:
            raise DomainError(
                "This operation needs an explicit disk_radius; the field is in"
                " self-consistent mode."
            )
        return self.disk_radius

    def with_disk(self, disk_radius: Optional[float]) -> "RelayField":
        return replace(self, disk_radius=disk_radius)

    @property
    def area(self) -> float:
        return float(np.pi * self.require_disk() ** 2)


@dataclass(frozen=True)
class PowerAllocation:
    """Split of a total SNR budget between the UAV (rho) and the relays."""

    rho: float
    total_budget_gamma: float

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise DomainError(f"rho must lie in (0, 1], got {self.rho}")
        if not (np.isfinite(self.total_budget_gamma) and self.total_budget_gamma > 0):
            raise DomainError("total_budget_gamma must be positive.")

    @property
    def gamma_u(self) -> float:
        return self.rho * self.total_budget_gamma

    @property
    def gamma_r(self) -> float:
        return (1.0 - self.rho) * self.total_budget_gamma

    def budget(self, xi: float, epsilon: float) -> LinkBudget:
        # rho = 1 leaves the relays silent; keep the budget positive
        gamma_r = max(self.gamma_r, np.finfo(float).tiny)
        return LinkBudget(self.gamma_u, gamma_r, xi, epsilon)


@dataclass(frozen=True)
class PowerAllocationOptimum:
    rho_opt: float
    r_c: float
    unimodal: bool


@dataclass(frozen=True)
class JointOptimum:
    h_opt: float
    rho_opt: float
    r_c_max: float
    unimodal: bool


@dataclass(frozen=True)
class PowerSavingReport:
    """Comparison of a relay-assisted strategy with the direct link at the
    same total budget and altitude.

    Attributes
    ----------
    h : float
        Altitude of the comparison.
    r_dc : float
        Direct-link coverage radius with the full budget on the UAV.
    rho_matching : float
        Smallest rho at which the strategy covers at least r_dc, NaN if none.
    power_saving : float
        1 - rho_matching, the share of UAV transmit power saved.
    rho_opt : float
        Coverage-maximizing rho at this altitude.
    r_opt : float
        Coverage radius at rho_opt.
    coverage_gain : float
        r_opt / r_dc - 1.
    """

    h: float
    r_dc: float
    rho_matching: float
    power_saving: float
    rho_opt: float
    r_opt: float
    coverage_gain: float


@dataclass(frozen=True)
class OptimumGainReport:
    """Joint (h, rho) optimum of a relay-assisted strategy against the best
    direct-link altitude with the full budget on the UAV.

    ``coverage_gain`` is r_c_max / r_dc_max - 1 and ``uav_power_saving`` is
    1 - rho_opt.
    """

    h_dc: float
    r_dc_max: float
    h_opt: float
    rho_opt: float
    r_c_max: float
    coverage_gain: float
    uav_power_saving: float


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def _panel_rule(a: float, b: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = _gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def _radial_rule(disk_radius, r_d, order):
    """Gauss-Legendre rule on [0, R], split at r_d when the destination lies
    strictly inside the disk."""
    if 0.0 < r_d < disk_radius:
        inner = _panel_rule(0.0, r_d, order)
        outer = _panel_rule(r_d, disk_radius, order)
        return np.concatenate((inner[0], outer[0])), np.concatenate(
            (inner[1], outer[1])
        )
    return _panel_rule(0.0, disk_radius, order)


def _angular_rule(order):
    # the integrand is even in phi about the destination direction
    nodes, weights = _panel_rule(0.0, np.pi, order)
    return nodes, 2.0 * weights


def _disk_integrals(
    r_d: float,
    h: float,
    disk_radius: float,
    model: PropagationModel,
    budget: LinkBudget,
    order: int,
) -> Tuple[float, float]:
    """Tensor-rule integrals of r * success_UR * fail_RD and
    r * success_UR * (1 - fail_RD) over the disk."""
    r, w_r = _radial_rule(disk_radius, r_d, order)
    phi, w_phi = _angular_rule(order)

    success_ur = np.asarray(
        air_to_ground_success(r, h, model, budget.xi, budget.gamma_u)
    )
    ell_rd = np.sqrt(
        np.maximum(
            r[:, np.newaxis] ** 2 + r_d**2 - 2.0 * r_d * r[:, np.newaxis] * np.cos(phi),
            0.0,
        )
    )
    fail_rd = np.asarray(
        ground_to_ground_outage(ell_rd, model, budget.xi, budget.gamma_r)
    )

    radial_weight = w_r * r * success_ur
    failed = radial_weight @ (fail_rd @ w_phi)
    served = radial_weight @ ((1.0 - fail_rd) @ w_phi)
    return float(failed), float(served)


def check_order(order: int) -> int:
    return max(int(round(order * CHECK_RATIO)), order + 1)


def _verified_disk_integrals(r_d, h, disk_radius, model, budget, order, verify):
    failed, served = _disk_integrals(r_d, h, disk_radius, model, budget, order)
    if not verify:
        return failed, served

    checked = check_order(order)
    check_failed, check_served = _disk_integrals(
        r_d, h, disk_radius, model, budget, checked
    )
    scale = max(abs(check_failed), abs(check_served), 1e-300)
    diff = max(abs(check_failed - failed), abs(check_served - served)) / scale
    if diff <= QUADRATURE_RTOL:
        return check_failed, check_served

    escalated = 2 * checked
    logger.warning(
        f"Disk quadrature at order {order} differs by {diff:.2e} from order"
        f" {checked}; escalating to order {escalated}."
    )
    return _disk_integrals(r_d, h, disk_radius, model, budget, escalated)


def psi1(
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    epsrel: float = 1e-10,
) -> float:
    """Area-weighted probability that a relay in the disk decodes the UAV.

    Returns
    -------
    float
        2 pi times the integral over [0, R] of r * P(relay at r decodes).

    Raises
    ------
    ConvergenceError
        Raised if adaptive quadrature misses its error target.
    """
    if h < 0:
        raise DomainError(f"h must be nonnegative, got {h}")
    disk_radius = field.require_disk()

    def integrand(r):
        return r * air_to_ground_success(r, h, model, budget.xi, budget.gamma_u)

    value, abserr = integrate.quad(
        integrand, 0.0, disk_radius, epsabs=0.0, epsrel=epsrel, limit=500
    )
    if abserr > max(1e-8 * abs(value), 1e-12 * disk_radius**2):
        raise ConvergenceError(
            f"Decoding-area quadrature did not converge (error estimate {abserr:.3g})."
        )
    return float(2.0 * np.pi * value)


def mean_decoding_set_size(
    h: float, field: RelayField, model: PropagationModel, budget: LinkBudget
) -> float:
    """Expected number of relays that decode the UAV."""
    return field.density * psi1(h, field, model, budget)


def psi2(
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
    verify: bool = True,
) -> float:
    """Area-weighted probability that a relay decodes the UAV but fails to
    reach the destination at ground distance r_d."""
    if r_d < 0 or h < 0:
        raise DomainError("r_d and h must be nonnegative.")
    failed, _ = _verified_disk_integrals(
        r_d, h, field.require_disk(), model, budget, order, verify
    )
    return failed


def relay_success_area(
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
    verify: bool = True,
) -> float:
    """psi1 - psi2, integrated directly so that it keeps relative precision
    when both terms are close."""
    if r_d < 0 or h < 0:
        raise DomainError("r_d and h must be nonnegative.")
    _, served = _verified_disk_integrals(
        r_d, h, field.require_disk(), model, budget, order, verify
    )
    return served


def outage_rc(
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
    verify: bool = True,
) -> float:
    """Relaying outage exp(-density * (psi1 - psi2))."""
    if field.density == 0.0:
        return 1.0
    area = relay_success_area(r_d, h, field, model, budget, order, verify)
    return float(np.exp(-field.density * area))


def outage_rc_lower_bound(
    r_d: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
) -> float:
    """Relaying outage with every relay in the decoding set. Independent of
    the altitude."""
    if r_d < 0:
        raise DomainError(f"r_d must be nonnegative, got {r_d}")
    if field.density == 0.0:
        return 1.0

    r, w_r = _radial_rule(field.require_disk(), r_d, order)
    phi, w_phi = _angular_rule(order)
    ell_rd = np.sqrt(
        np.maximum(
            r[:, np.newaxis] ** 2 + r_d**2 - 2.0 * r_d * r[:, np.newaxis] * np.cos(phi),
            0.0,
        )
    )
    served = 1.0 - np.asarray(
        ground_to_ground_outage(ell_rd, model, budget.xi, budget.gamma_r)
    )
    area = float((w_r * r) @ (served @ w_phi))
    return float(np.exp(-field.density * area))


def outage_cc(
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
    verify: bool = True,
) -> float:
    """Selection-combining outage: both the direct and the relayed path fail."""
    direct = outage_dc(Geometry(r_d, h), model, budget)
    return direct * outage_rc(r_d, h, field, model, budget, order, verify)


def strategy_outage(
    strategy: Strategy,
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
) -> float:
    if strategy is Strategy.DIRECT:
        return outage_dc(Geometry(r_d, h), model, budget)
    if strategy is Strategy.RELAYING:
        return outage_rc(r_d, h, field, model, budget, order)
    return outage_cc(r_d, h, field, model, budget, order)


def _edge_of_disk(strategy, h, field, model, budget, order, r_guess):
    """r_d at which the strategy outage reaches epsilon for the field's disk."""

    def outage(r):
        return strategy_outage(strategy, r, h, field, model, budget, order)

    lo = 0.0 if h > 0 else 1e-9
    hi = max(r_guess, 100.0)
    r_c = solve_increasing(outage, budget.epsilon, lo, hi, _RADIUS_LIMIT, xtol=1e-6)
    return 0.0 if r_c == lo else r_c


def _self_consistent_radius(
    strategy, h, field, model, budget, order, radius, tol, maxiter
):
    """Iterates r -> edge(disk = r). From the second step on, the limit is
    extrapolated (Aitken); as soon as two visited radii straddle the fixed
    point the bracket is polished with brentq, so that
    outage(r*, disk = r*) = epsilon holds to the root tolerance."""
    excess_at = {}

    def excess(r):
        if r not in excess_at:
            edge = _edge_of_disk(
                strategy, h, field.with_disk(r), model, budget, order, r
            )
            excess_at[r] = edge - r
        return excess_at[r]

    def polish(a, b):
        lo, hi = min(a, b), max(a, b)
        try:
            return float(optimize.brentq(excess, lo, hi, xtol=FIXED_POINT_XTOL))
        except (ValueError, RuntimeError) as ex:
            raise ConvergenceError(
                f"Coverage radius at h={h:g} could not be polished in"
                f" [{lo:.3f}, {hi:.3f}]: {ex}",
                last_iterate=radius,
            ) from ex

    visited = []
    for _ in range(maxiter):
        step = excess(radius)
        new_radius = radius + step
        logger.debug(f"Fixed-point step at h={h:g}: {radius:.3f} -> {new_radius:.3f}")
        if new_radius <= 0.0:
            return 0.0
        if step == 0.0:
            return radius

        next_radius = new_radius
        if visited:
            last_radius, last_step = visited[-1]
            if last_step * step < 0:
                return polish(last_radius, radius)
            ratio = step / last_step
            reach = step * ratio / (1.0 - ratio) if ratio < 1.0 else 4.0 * step
            jump = new_radius + 2.0 * reach + np.copysign(tol, step)
            jump = float(np.clip(jump, 0.5 * new_radius, _RADIUS_LIMIT))
            if excess(jump) * step < 0:
                return polish(radius, jump)
            next_radius = jump

        visited.append((radius, step))
        if abs(step) < tol:
            return new_radius
        radius = next_radius

    recent = np.sign([step for _, step in visited[-4:]])
    oscillating = bool(np.any(recent[1:] != recent[:-1]))
    raise ConvergenceError(
        f"Coverage radius at h={h:g} did not settle after {maxiter} iterations.",
        last_iterate=radius,
        oscillating=oscillating,
    )


def coverage_radius(
    strategy: Strategy,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    order: int = QUADRATURE_ORDER,
    tol: float = FIXED_POINT_TOL,
    maxiter: int = FIXED_POINT_MAXITER,
) -> float:
    """Coverage radius of a strategy at altitude h.

    With an explicit disk the radius is the root of outage(r) = epsilon. In
    self-consistent mode (``field.disk_radius is None``) the disk is updated
    with each root until successive radii differ by less than ``tol``, or until
    two visited radii bracket the fixed point, which is then solved exactly.

    Raises
    ------
    ConvergenceError
        Raised if the self-consistent iteration does not settle within
        ``maxiter`` steps. Carries the last iterate and whether the iterates
        were oscillating.
    """
    if h < 0:
        raise DomainError(f"h must be nonnegative, got {h}")
    r_dc = coverage_radius_dc(h, model, budget)
    if strategy is Strategy.DIRECT:
        return r_dc

    if not field.is_auto:
        return _edge_of_disk(strategy, h, field, model, budget, order, r_dc)

    radius = r_dc if r_dc > 0 else 100.0
    return _self_consistent_radius(
        strategy, h, field, model, budget, order, radius, tol, maxiter
    )


def _coverage_at_rho(
    strategy, rho, h, total_budget_gamma, field, model, xi, epsilon, order
):
    budget = PowerAllocation(rho, total_budget_gamma).budget(xi, epsilon)
    return coverage_radius(strategy, h, field, model, budget, order)


def optimize_power_allocation(
    strategy: Strategy,
    h: float,
    total_budget_gamma: float,
    field: RelayField,
    model: PropagationModel,
    xi: float,
    epsilon: float,
    rho_bounds: Tuple[float, float] = RHO_BOUNDS,
    grid_points: int = 12,
    rho_tol: float = 1e-3,
    order: int = QUADRATURE_ORDER,
) -> PowerAllocationOptimum:
    """Share of the total budget given to the UAV that maximizes coverage.

    Parameters
    ----------
    strategy : Strategy
    h : float
        UAV altitude.
    total_budget_gamma : float
        Linear total SNR budget, split as rho to the UAV and 1 - rho to relays.
    field : RelayField
    model : PropagationModel
    xi, epsilon : float
        SNR threshold and target outage.
    rho_bounds : Tuple[float, float]
        Search interval for rho.
    grid_points : int
        Coarse grid size before golden-section refinement.
    rho_tol : float
        Relative bracket width at which refinement stops.

    Returns
    -------
    PowerAllocationOptimum
    """
    grid = np.linspace(rho_bounds[0], rho_bounds[1], grid_points)
    result = maximize_on_grid(
        lambda rho: _coverage_at_rho(
            strategy, rho, h, total_budget_gamma, field, model, xi, epsilon, order
        ),
        grid,
        xtol=rho_tol,
    )
    return PowerAllocationOptimum(float(result.x), float(result.value), result.unimodal)


def _altitude_ceiling(total_budget_gamma, model, xi, epsilon):
    full_power = LinkBudget(total_budget_gamma, total_budget_gamma, xi, epsilon)
    return config_space_point(0.5 * np.pi, model, full_power).h


def joint_optimum(
    strategy: Strategy,
    total_budget_gamma: float,
    field: RelayField,
    model: PropagationModel,
    xi: float,
    epsilon: float,
    h_bounds: Optional[Tuple[float, float]] = None,
    h_points: int = 12,
    h_tol: float = 1e-3,
    **allocation_kwargs,
) -> JointOptimum:
    """Altitude and power split maximizing coverage, by golden-section search
    over log(h) with the power split optimized at every altitude."""
    if h_bounds is None:
        h_bounds = (10.0, _altitude_ceiling(total_budget_gamma, model, xi, epsilon))

    inner = {}

    def coverage(log_h):
        h = float(np.exp(log_h))
        inner[log_h] = optimize_power_allocation(
            strategy,
            h,
            total_budget_gamma,
            field,
            model,
            xi,
            epsilon,
            **allocation_kwargs,
        )
        return inner[log_h].r_c

    grid = np.linspace(np.log(h_bounds[0]), np.log(h_bounds[1]), h_points)
    result = maximize_on_grid(coverage, grid, xtol=h_tol)
    best = inner.get(result.x)
    if best is None:
        coverage(result.x)
        best = inner[result.x]

    return JointOptimum(
        h_opt=float(np.exp(result.x)),
        rho_opt=best.rho_opt,
        r_c_max=best.r_c,
        unimodal=result.unimodal and best.unimodal,
    )


def compare_with_direct(
    strategy: Strategy,
    h: float,
    total_budget_gamma: float,
    field: RelayField,
    model: PropagationModel,
    xi: float,
    epsilon: float,
    order: int = QUADRATURE_ORDER,
    **allocation_kwargs,
) -> PowerSavingReport:
    """Power saving and coverage gain of a relay-assisted strategy over the
    direct link at the same altitude and total budget."""
    full_power = LinkBudget(total_budget_gamma, total_budget_gamma, xi, epsilon)
    r_dc = coverage_radius_dc(h, model, full_power)

    best = optimize_power_allocation(
        strategy,
        h,
        total_budget_gamma,
        field,
        model,
        xi,
        epsilon,
        order=order,
        **allocation_kwargs,
    )

    def shortfall(rho):
        return (
            _coverage_at_rho(
                strategy, rho, h, total_budget_gamma, field, model, xi, epsilon, order
            )
            - r_dc
        )

    lo = allocation_kwargs.get("rho_bounds", RHO_BOUNDS)[0]
    if best.r_c < r_dc:
        rho_matching = np.nan
    elif shortfall(lo) >= 0:
        rho_matching = lo
    else:
        rho_matching = optimize.brentq(shortfall, lo, best.rho_opt, xtol=1e-4)

    gain = best.r_c / r_dc - 1.0 if r_dc > 0 else np.inf
    return PowerSavingReport(
        h=h,
        r_dc=r_dc,
        rho_matching=float(rho_matching),
        power_saving=float(1.0 - rho_matching),
        rho_opt=best.rho_opt,
        r_opt=best.r_c,
        coverage_gain=float(gain),
    )



def compare_optima(
    strategy: Strategy,
    total_budget_gamma: float,
    field: RelayField,
    model: PropagationModel,
    xi: float,
    epsilon: float,
    **joint_kwargs,
) -> OptimumGainReport:
    """Coverage of the joint optimum over the direct link at its own optimum
    altitude, both with the same total budget."""
    full_power = LinkBudget(total_budget_gamma, total_budget_gamma, xi, epsilon)
    direct = optimal_theta_coverage(model, full_power)
    best = joint_optimum(
        strategy, total_budget_gamma, field, model, xi, epsilon, **joint_kwargs
    )
    gain = best.r_c_max / direct.r_c_max - 1.0 if direct.r_c_max > 0 else np.inf
    logger.info(
        f"{strategy.value} optimum covers {best.r_c_max:.1f} m against"
        f" {direct.r_c_max:.1f} m for the direct link ({gain:+.1%})"
    )
    return OptimumGainReport(
        h_dc=direct.h_opt,
        r_dc_max=direct.r_c_max,
        h_opt=best.h_opt,
        rho_opt=best.rho_opt,
        r_c_max=best.r_c_max,
        coverage_gain=float(gain),
        uav_power_saving=1.0 - best.rho_opt,
    )
