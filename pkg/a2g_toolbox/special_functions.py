"""Marcum Q-function of the first order, its inverse with respect to the second
argument, and the Gaussian Q-function pair they depend on.

The Marcum Q-function is evaluated as a Poisson mixture of central chi-square
tails,

    Q1(x, y) = sum_k Pois(k; x^2/2) * P(chi^2_{2k+2} > y^2),

with the Poisson index restricted to a window whose neglected mass is far below
1e-14. Products x*y above ``QUADRATURE_THRESHOLD`` fall back to adaptive
quadrature of the defining integral.
"""
import logging
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy import integrate, optimize, special

from .classes import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

QUADRATURE_THRESHOLD = 10_000.0
INVERSE_TOL = 1e-10
_CHUNK = 4096
# Poisson window half-width in standard deviations; the excluded mass is < 1e-20
_WINDOW_SIGMAS = 10.0


def _validate_marcum_args(x: ArrayLike, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    x_arr, y_arr = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    )
    if not (np.all(np.isfinite(x_arr)) and np.all(np.isfinite(y_arr))):
        raise DomainError("Marcum Q arguments must be finite.")
    if np.any(x_arr < 0) or np.any(y_arr < 0):
        raise DomainError("Marcum Q arguments must be nonnegative.")
    return x_arr, y_arr


def _validate_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 < p < 1.0) or not np.isfinite(p):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p}")
    return p


def _poisson_window(mu: np.ndarray) -> np.ndarray:
    spread = _WINDOW_SIGMAS * np.sqrt(mu.max()) + 20.0
    lo = max(0, int(np.floor(mu.min() - spread)))
    hi = int(np.ceil(mu.max() + spread))
    return np.arange(lo, hi + 1, dtype=float)


def _marcum_series(x: np.ndarray, y: np.ndarray, upper: bool) -> np.ndarray:
    """Poisson-weighted sum of central chi-square tails (upper) or CDFs (lower)
    for 1-D arrays x and y."""
    out = np.empty_like(x)
    tail_fn = special.gammaincc if upper else special.gammainc

    for start in range(0, x.size, _CHUNK):
        stop = start + _CHUNK
        mu = 0.5 * x[start:stop] ** 2
        half_y2 = 0.5 * y[start:stop] ** 2

        k = _poisson_window(mu)[:, np.newaxis]
        log_weights = special.xlogy(k, mu) - mu - special.gammaln(k + 1)
        terms = np.exp(log_weights) * tail_fn(k + 1, half_y2)
        out[start:stop] = terms.sum(axis=0)

    return out


def _marcum_quad(x: float, y: float, upper: bool) -> float:
    """Adaptive quadrature of the defining integral. The integrand is written
    with the exponentially scaled Bessel function so it stays finite for large
    x*t; its mass is confined to t in [x - 40, x + 40]."""

    def integrand(t):
        return t * np.exp(-0.5 * (t - x) ** 2) * special.i0e(x * t)

    lo, hi = max(0.0, x - 40.0), x + 40.0
    if upper:
        if y >= hi:
            return 0.0
        value, _ = integrate.quad(
            integrand, max(y, lo), hi, epsabs=1e-15, epsrel=1e-12, limit=200
        )
    else:
        if y <= lo:
            return 0.0
        value, _ = integrate.quad(
            integrand, lo, min(y, hi), epsabs=1e-15, epsrel=1e-12, limit=200
        )
    return float(min(max(value, 0.0), 1.0))


def _marcum(x: ArrayLike, y: ArrayLike, upper: bool) -> ArrayLike:
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    x_arr, y_arr = _validate_marcum_args(x, y)
    shape = x_arr.shape
    x_flat, y_flat = x_arr.ravel(), y_arr.ravel()

    out = np.empty_like(x_flat)
    use_quad = x_flat * y_flat > QUADRATURE_THRESHOLD

    if np.any(~use_quad):
        out[~use_quad] = _marcum_series(x_flat[~use_quad], y_flat[~use_quad], upper)

    for idx in np.flatnonzero(use_quad):
        out[idx] = _marcum_quad(x_flat[idx], y_flat[idx], upper)

    # the support boundary is exact
    out[y_flat == 0.0] = 1.0 if upper else 0.0
    out = np.clip(out, 0.0, 1.0).reshape(shape)

    if scalar:
        return float(out)
    return out


def marcum_q(x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """First-order Marcum Q-function Q1(x, y).

    Parameters
    ----------
    x : float or np.ndarray
        First argument (noncentrality amplitude), nonnegative.
    y : float or np.ndarray
        Second argument (threshold amplitude), nonnegative.

    Returns
    -------
    float or np.ndarray
        Q1(x, y), broadcast over the inputs.

    Raises
    ------
    DomainError
        Raised on negative or non-finite input.
    """
    return _marcum(x, y, upper=True)


def marcum_q_complement(x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """1 - Q1(x, y), evaluated directly as the noncentral chi-square CDF so that
    small values keep their relative precision."""
    return _marcum(x, y, upper=False)


def gaussian_q(x: ArrayLike) -> ArrayLike:
    """Tail probability of the standard normal distribution."""
    value = 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    if np.ndim(value) == 0:
        return float(value)
    return value


def inv_gaussian_q(p: float) -> float:
    """Inverse of gaussian_q on (0, 1)."""
    p = _validate_probability(p)
    return float(-special.ndtri(p))


def bessel_ratio(z: ArrayLike) -> ArrayLike:
    """I1(z) / I0(z), computed from the exponentially scaled Bessel functions."""
    z = np.asarray(z, dtype=float)
    ratio = special.i1e(z) / special.i0e(z)
    if np.ndim(ratio) == 0:
        return float(ratio)
    return ratio


def inv_marcum_q_exact(x: float, p: float) -> float:
    """Solves Q1(x, y) = p for y by bracketing and Brent refinement.

    Parameters
    ----------
    x : float
        First Marcum argument, nonnegative.
    p : float
        Target probability in (0, 1).

    Returns
    -------
    float
        y with |Q1(x, y) - p| <= 1e-10.

    Raises
    ------
    DomainError
        Raised if p is not in (0, 1) or x is negative.
    ConvergenceError
        Raised if no bracket exists within y in [0, x + 50].
    """
    p = _validate_probability(p)
    x = float(x)
    if x < 0 or not np.isfinite(x):
        raise DomainError(f"x must be finite and nonnegative, got {x}")

    # solve on whichever tail keeps the residual well conditioned
    if p > 0.5:

        def residual(y):
            return (1.0 - p) - marcum_q_complement(x, y)

    else:

        def residual(y):
            return marcum_q(x, y) - p

    y_limit = x + 50.0
    with np.errstate(over="ignore"):
        small_x_guess = np.sqrt(-2.0 * np.log(p)) * np.exp(0.25 * x**2)
    hi = min(max(small_x_guess, x + 10.0), y_limit)

    while residual(hi) > 0:
        if hi >= y_limit:
            raise ConvergenceError(
                f"Could not bracket the inverse Marcum Q for x={x}, p={p}"
                f" within y <= {y_limit}."
            )
        hi = min(2.0 * hi, y_limit)

    if residual(0.0) <= 0:
        return 0.0

    try:
        y = optimize.brentq(residual, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    except (ValueError, RuntimeError) as ex:
        raise ConvergenceError(
            f"Inverse Marcum Q solve failed for x={x}, p={p}: {ex}"
        ) from ex

    if abs(marcum_q(x, y) - p) > INVERSE_TOL:
        raise ConvergenceError(
            f"Inverse Marcum Q residual above tolerance for x={x}, p={p}."
        )
    return float(y)


def _small_x_branch(x: float, epsilon: float) -> float:
    return np.sqrt(-2.0 * np.log1p(-epsilon)) * np.exp(0.25 * x**2)


def _large_x_branch(x: float, q_inv: float) -> float:
    if abs(q_inv) < 1e-12:
        return x + 1.0 / (2.0 * x)
    return x + np.log(x / (x - q_inv)) / (2.0 * q_inv) - q_inv


@lru_cache(maxsize=256)
def find_branch_intersection(epsilon: float) -> float:
    """Switch point x0 between the small-x and large-x branches of the
    approximate inverse Marcum Q-function.

    The small-x branch increases to +inf while the large-x branch falls from
    +inf just above max(0, Q^-1(epsilon)), so their difference changes sign
    exactly once on the search interval.

    Raises
    ------
    ConvergenceError
        Raised if the branch difference has no sign change on
        (max(0, Q^-1(epsilon)) + 1e-6, 20].
    """
    epsilon = _validate_probability(epsilon, "epsilon")
    q_inv = inv_gaussian_q(epsilon)

    def difference(x):
        return _small_x_branch(x, epsilon) - _large_x_branch(x, q_inv)

    lo, hi = max(0.0, q_inv) + 1e-6, 20.0
    if np.sign(difference(lo)) == np.sign(difference(hi)):
        raise ConvergenceError(
            f"Branches of the inverse Marcum approximation do not cross for"
            f" epsilon={epsilon}."
        )
    return float(optimize.brentq(difference, lo, hi, xtol=1e-13, maxiter=200))


def inv_marcum_q_approx(x: float, epsilon: float) -> float:
    """Closed-form approximation of y = Q1^-1(x, 1 - epsilon).

    Uses sqrt(-2 ln(1 - epsilon)) * exp(x^2 / 4) up to the branch switch x0 and
    the large-x expansion beyond it (x + 1/(2x) when Q^-1(epsilon) = 0).
    """
    epsilon = _validate_probability(epsilon, "epsilon")
    x = float(x)
    if x < 0 or not np.isfinite(x):
        raise DomainError(f"x must be finite and nonnegative, got {x}")

    x0 = find_branch_intersection(epsilon)
    if x <= x0:
        return float(_small_x_branch(x, epsilon))
    return float(_large_x_branch(x, inv_gaussian_q(epsilon)))
