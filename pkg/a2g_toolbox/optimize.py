"""Scalar solvers shared by the direct-link and relay-network optimizers."""
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .classes import ConvergenceError, NoRootError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridOptimum:
    """Result of a grid scan with optional golden-section refinement.

    Attributes
    ----------
    x : float
        Location of the optimum.
    value : float
        Objective value at x.
    unimodal : bool
        False if the grid profile had more than one local optimum. The best
        grid point is returned unrefined in that case.
    refined : bool
        True if golden-section refinement moved the estimate off the grid.
    """

    x: float
    value: float
    unimodal: bool
    refined: bool


def find_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-13,
    maxiter: int = 200,
) -> float:
    """Brent root of fn on [lo, hi].

    Raises
    ------
    NoRootError
        Raised if fn does not change sign on the interval.
    ConvergenceError
        Raised if the iteration limit is hit.
    """
    f_lo, f_hi = fn(lo), fn(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise NoRootError(f"Residual is not finite at the ends of [{lo}, {hi}].")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoRootError(f"Residual has no sign change on [{lo}, {hi}].")
    try:
        return float(optimize.brentq(fn, lo, hi, xtol=xtol, maxiter=maxiter))
    except RuntimeError as ex:
        raise ConvergenceError(str(ex))


def solve_increasing(
    fn: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    limit: float,
    xtol: float = 1e-9,
) -> float:
    """Smallest x >= lo with fn(x) = target for a non-decreasing fn.

    Returns lo if fn(lo) already exceeds the target. The upper end is doubled
    until fn(hi) > target or hi reaches ``limit``.
    """
    if fn(lo) > target:
        return lo

    while fn(hi) <= target:
        if hi >= limit:
            raise ConvergenceError(
                f"Could not bracket the crossing of {target} below {limit}.",
                last_iterate=hi,
            )
        lo, hi = hi, min(2.0 * hi, limit)

    return float(
        optimize.brentq(lambda x: fn(x) - target, lo, hi, xtol=xtol, maxiter=200)
    )


def count_local_minima(values: Sequence[float], atol: float = 1e-12) -> int:
    """Number of strict local minima of a sampled profile, counting plateaus
    once and the ends as candidates. Steps no larger than ``atol`` count as
    flat, so rounding noise on a saturated profile is not a minimum."""
    values = np.asarray(values, dtype=float)
    # collapse runs of equal values
    keep = np.concatenate(([True], np.abs(np.diff(values)) > atol))
    values = values[keep]
    if values.size < 3:
        return 1

    left = np.concatenate(([np.inf], values[:-1]))
    right = np.concatenate((values[1:], [np.inf]))
    return int(np.sum((values < left) & (values < right)))


def minimize_on_grid(
    fn: Callable[[float], float],
    grid: Sequence[float],
    xtol: float = 1e-4,
) -> GridOptimum:
    """Coarse scan over ``grid`` followed by golden-section refinement inside
    the bracket around the best grid point.

    Parameters
    ----------
    fn : Callable[[float], float]
        Objective, assumed unimodal over the grid range.
    grid : Sequence[float]
        Increasing sample locations.
    xtol : float
        Relative bracket width at which the golden search stops.

    Returns
    -------
    GridOptimum
    """
    grid = np.asarray(grid, dtype=float)
    values = np.array([fn(x) for x in grid])
    best = int(np.argmin(values))
    unimodal = count_local_minima(values) == 1

    if not unimodal:
        logger.warning(
            f"Objective profile is not unimodal over [{grid[0]:.6g}, {grid[-1]:.6g}];"
            " returning the best grid point."
        )
        return GridOptimum(grid[best], values[best], False, False)

    if best == 0 or best == grid.size - 1:
        return GridOptimum(grid[best], values[best], True, False)

    bracket = (grid[best - 1], grid[best], grid[best + 1])
    try:
        result = optimize.minimize_scalar(
            fn, bracket=bracket, method="golden", tol=xtol
        )
    except ValueError:
        # flat neighbourhood, golden search needs a strict bracket
        return GridOptimum(grid[best], values[best], True, False)

    if result.fun > values[best] or not (bracket[0] <= result.x <= bracket[2]):
        return GridOptimum(grid[best], values[best], True, False)
    return GridOptimum(float(result.x), float(result.fun), True, True)


def maximize_on_grid(
    fn: Callable[[float], float],
    grid: Sequence[float],
    xtol: float = 1e-4,
) -> GridOptimum:
    result = minimize_on_grid(lambda x: -fn(x), grid, xtol=xtol)
    return GridOptimum(result.x, -result.value, result.unimodal, result.refined)
