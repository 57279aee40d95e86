"""Elevation-angle dependent propagation model and link-level arithmetic.

All quantities are linear. dB inputs are converted once, in the ``from_db``
constructors.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import special
from typing_extensions import Self

from .classes import DomainError
from .special_functions import marcum_q, marcum_q_complement

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

HALF_PI = 0.5 * np.pi
SPEED_OF_LIGHT = 299_792_458.0
_ANGLE_SLACK = 1e-12

# urban LoS fit 1 / (1 + 9.61 exp(-0.16 (deg - 9.61))) rewritten in radians
URBAN_LOS_A2 = float(9.61 * np.exp(0.16 * 9.61))
URBAN_LOS_B2 = float(np.degrees(0.16))


def db_to_linear(value_db: ArrayLike) -> ArrayLike:
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value: ArrayLike) -> ArrayLike:
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def budget_from_physical(a_db: float, p_tx_dbm: float, n0_dbm: float) -> float:
    """Transmit-SNR budget A * P / N0 from dB/dBm quantities."""
    return float(db_to_linear(a_db + p_tx_dbm - n0_dbm))


@dataclass(frozen=True)
class PropagationModel:
    """Parametric forms of the Rician factor and path-loss exponent versus the
    elevation angle.

    Attributes
    ----------
    kappa0 : float
        Linear Rician factor at theta = 0.
    kappa_half_pi : float
        Linear Rician factor at theta = pi/2.
    alpha0 : float
        Path-loss exponent at theta = 0.
    alpha_half_pi : float
        Path-loss exponent at theta = pi/2.
    a2 : float
        Scale of the logistic LoS probability.
    b2 : float
        Rate of the logistic LoS probability, per radian.
    exact_fit : bool
        If True, a1 and b1 are chosen so the path-loss exponent hits alpha0 and
        alpha_half_pi exactly at the endpoints. Otherwise the approximations
        a1 = alpha_half_pi - alpha0, b1 = alpha0 are used.

    Methods
    -------
    from_db(kappa0_db, kappa_half_pi_db, alpha0, alpha_half_pi, ...)
        Builds an instance from dB-valued Rician factors.
    case_study()
        The bundled urban parameter set, with the urban logistic LoS fit.
    """

    kappa0: float
    kappa_half_pi: float
    alpha0: float
    alpha_half_pi: float
    a2: float = 10.0
    b2: float = 3.0
    exact_fit: bool = True

    def __post_init__(self):
        values = (
            self.kappa0,
            self.kappa_half_pi,
            self.alpha0,
            self.alpha_half_pi,
            self.a2,
            self.b2,
        )
        if not all(np.isfinite(values)):
            raise DomainError("PropagationModel parameters must be finite.")
        if self.kappa0 <= 0:
            raise DomainError(f"kappa0 must be positive, got {self.kappa0}")
        if self.kappa_half_pi < self.kappa0:
            raise DomainError("kappa_half_pi must be at least kappa0.")
        if self.alpha_half_pi < 2:
            raise DomainError("alpha_half_pi must be at least 2.")
        if self.alpha0 < self.alpha_half_pi:
            raise DomainError("alpha0 must be at least alpha_half_pi.")
        if self.a2 <= 0 or self.b2 <= 0:
            raise DomainError("a2 and b2 must be positive.")

    @classmethod
    def from_db(
        cls,
        kappa0_db: float,
        kappa_half_pi_db: float,
        alpha0: float,
        alpha_half_pi: float,
        a2: float = 10.0,
        b2: float = 3.0,
        exact_fit: bool = True,
    ) -> Self:
        return cls(
            kappa0=float(db_to_linear(kappa0_db)),
            kappa_half_pi=float(db_to_linear(kappa_half_pi_db)),
            alpha0=alpha0,
            alpha_half_pi=alpha_half_pi,
            a2=a2,
            b2=b2,
            exact_fit=exact_fit,
        )

    @classmethod
    def case_study(cls) -> Self:
        return cls.from_db(5.0, 15.0, 3.5, 2.0, a2=URBAN_LOS_A2, b2=URBAN_LOS_B2)

    @cached_property
    def a1(self) -> float:
        if not self.exact_fit:
            return self.alpha_half_pi - self.alpha0
        p_span = p_los(HALF_PI, self) - p_los(0.0, self)
        return (self.alpha_half_pi - self.alpha0) / p_span

    @cached_property
    def b1(self) -> float:
        if not self.exact_fit:
            return self.alpha0
        return self.alpha0 - self.a1 * p_los(0.0, self)

    @property
    def a3(self) -> float:
        return self.kappa0

    @cached_property
    def b3(self) -> float:
        return (2.0 / np.pi) * np.log(self.kappa_half_pi / self.kappa0)


@dataclass(frozen=True)
class LinkBudget:
    """Linear transmit-SNR budgets, SNR threshold and target outage."""

    gamma_u: float
    gamma_r: float
    xi: float
    epsilon: float

    def __post_init__(self):
        for name in ("gamma_u", "gamma_r", "xi"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @classmethod
    def from_db(
        cls, gamma_u_db: float, gamma_r_db: float, xi_db: float, epsilon: float
    ) -> Self:
        return cls(
            gamma_u=float(db_to_linear(gamma_u_db)),
            gamma_r=float(db_to_linear(gamma_r_db)),
            xi=float(db_to_linear(xi_db)),
            epsilon=epsilon,
        )

    @classmethod
    def case_study(cls) -> Self:
        return cls.from_db(75.0, 75.0, 4.0, 0.1)


@dataclass(frozen=True)
class Geometry:
    """Ground distance r_d from the UAV projection to the destination and the
    UAV altitude h, both in meters."""

    r_d: float
    h: float

    def __post_init__(self):
        if not (np.isfinite(self.r_d) and np.isfinite(self.h)):
            raise DomainError("Geometry coordinates must be finite.")
        if self.r_d < 0 or self.h < 0:
            raise DomainError("Geometry coordinates must be nonnegative.")
        if self.r_d == 0 and self.h == 0:
            raise DomainError("r_d and h cannot both be zero.")

    @cached_property
    def theta_d(self) -> float:
        return float(np.arctan2(self.h, self.r_d))

    @cached_property
    def ell_ud(self) -> float:
        return float(np.hypot(self.r_d, self.h))


class Derivatives(NamedTuple):
    k_prime: ArrayLike
    alpha_prime: ArrayLike
    x_prime: ArrayLike


def _check_angle(theta: ArrayLike) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)):
        raise DomainError("Elevation angle must be finite.")
    if np.any(theta < 0) or np.any(theta > HALF_PI + _ANGLE_SLACK):
        raise DomainError("Elevation angle must lie in [0, pi/2].")
    return np.minimum(theta, HALF_PI)


def _as_output(value: np.ndarray) -> ArrayLike:
    if np.ndim(value) == 0:
        return float(value)
    return value


def p_los(theta: ArrayLike, model: PropagationModel) -> ArrayLike:
    """Logistic line-of-sight probability 1 / (1 + a2 exp(-b2 theta))."""
    theta = _check_angle(theta)
    return _as_output(1.0 / (1.0 + model.a2 * np.exp(-model.b2 * theta)))


def rician_factor(theta: ArrayLike, model: PropagationModel) -> ArrayLike:
    """K(theta) = kappa0 * exp(b3 * theta), with both endpoints pinned."""
    theta = _check_angle(theta)
    k = model.a3 * np.exp(model.b3 * theta)
    k = np.where(theta == 0.0, model.kappa0, k)
    k = np.where(theta == HALF_PI, model.kappa_half_pi, k)
    return _as_output(k)


def path_loss_exponent(theta: ArrayLike, model: PropagationModel) -> ArrayLike:
    """alpha(theta) = a1 * P_LoS(theta) + b1."""
    return _as_output(model.a1 * np.asarray(p_los(theta, model)) + model.b1)


def fitted_path_loss_exponent(
    theta: ArrayLike, a1: float, offset: float, model: PropagationModel
) -> ArrayLike:
    """Path-loss exponent built from a fit_alpha_from_pl_model result, with the
    LoS probability taken from ``model``."""
    return _as_output(a1 * np.asarray(p_los(theta, model)) + offset)


def derivatives(theta: ArrayLike, model: PropagationModel) -> Derivatives:
    """Analytic derivatives of K, alpha and x = sqrt(2K) with respect to theta.

    Returns
    -------
    Derivatives
        (K'(theta), alpha'(theta), x'(theta))
    """
    theta = _check_angle(theta)
    k = np.asarray(rician_factor(theta, model))
    decay = model.a2 * np.exp(-model.b2 * theta)

    k_prime = model.b3 * k
    alpha_prime = model.a1 * model.b2 * decay / (1.0 + decay) ** 2
    x_prime = k_prime / np.sqrt(2.0 * k)
    return Derivatives(
        _as_output(k_prime), _as_output(alpha_prime), _as_output(x_prime)
    )


def rician_fading_cdf(omega: ArrayLike, k: ArrayLike) -> ArrayLike:
    """P(Omega <= omega) for unit-mean Rician fading power with factor k."""
    omega = np.asarray(omega, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(omega < 0) or np.any(k < 0):
        raise DomainError("omega and k must be nonnegative.")
    return marcum_q_complement(np.sqrt(2.0 * k), np.sqrt(2.0 * (k + 1.0) * omega))


def rician_fading_pdf(omega: ArrayLike, k: ArrayLike) -> ArrayLike:
    """Density of unit-mean Rician fading power with factor k."""
    omega = np.asarray(omega, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(omega < 0) or np.any(k < 0):
        raise DomainError("omega and k must be nonnegative.")
    z = 2.0 * np.sqrt(k * (k + 1.0) * omega)
    density = (k + 1.0) * np.exp(-k - (k + 1.0) * omega + z) * special.i0e(z)
    return _as_output(density)


def _marcum_arguments(k, alpha, length, xi, gamma):
    with np.errstate(divide="ignore"):
        log_length = np.log(length)
    path_gain = np.exp(alpha * log_length)
    x = np.sqrt(2.0 * k)
    y = np.sqrt(2.0 * xi * (1.0 + k) * path_gain / gamma)
    return x, y


def air_to_ground_success(
    ground_distance: ArrayLike,
    height: ArrayLike,
    model: PropagationModel,
    xi: float,
    gamma: float,
) -> ArrayLike:
    """P(SNR > xi) on an air-to-ground link seen at elevation atan(h / r)."""
    ground_distance = np.asarray(ground_distance, dtype=float)
    height = np.asarray(height, dtype=float)
    theta = np.arctan2(height, ground_distance)
    x, y = _marcum_arguments(
        np.asarray(rician_factor(theta, model)),
        np.asarray(path_loss_exponent(theta, model)),
        np.hypot(ground_distance, height),
        xi,
        gamma,
    )
    return marcum_q(x, y)


def air_to_ground_outage(
    ground_distance: ArrayLike,
    height: ArrayLike,
    model: PropagationModel,
    xi: float,
    gamma: float,
) -> ArrayLike:
    """P(SNR <= xi) on an air-to-ground link, without cancellation."""
    ground_distance = np.asarray(ground_distance, dtype=float)
    height = np.asarray(height, dtype=float)
    theta = np.arctan2(height, ground_distance)
    x, y = _marcum_arguments(
        np.asarray(rician_factor(theta, model)),
        np.asarray(path_loss_exponent(theta, model)),
        np.hypot(ground_distance, height),
        xi,
        gamma,
    )
    return marcum_q_complement(x, y)


def ground_to_ground_outage(
    distance: ArrayLike, model: PropagationModel, xi: float, gamma: float
) -> ArrayLike:
    """P(SNR <= xi) on a ground link, which sees kappa0 and alpha0."""
    distance = np.asarray(distance, dtype=float)
    x, y = _marcum_arguments(model.kappa0, model.alpha0, distance, xi, gamma)
    return marcum_q_complement(x, np.broadcast_to(y, distance.shape))


class AlphaFit(NamedTuple):
    a1: float
    offset: float


def _free_space_db(freq_hz: float, distances: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(4.0 * np.pi * freq_hz * distances / SPEED_OF_LIGHT)


def fit_alpha_from_pl_model(
    freq_hz: float,
    sigma_los_db: float,
    sigma_nlos_db: float,
    a_db: float,
    distances: Sequence[float],
) -> AlphaFit:
    """Fits alpha(theta) = a1 * P_LoS(theta) + offset to a free-space model with
    LoS/NLoS excess losses, averaged over the given link distances.

    Parameters
    ----------
    freq_hz : float
        Carrier frequency.
    sigma_los_db, sigma_nlos_db : float
        Excess loss over free space for LoS and NLoS links.
    a_db : float
        Constant term of the log-distance model the fit is matched against.
    distances : Sequence[float]
        Link distances in meters, all above 1 m.

    Returns
    -------
    AlphaFit
    """
    distances = np.asarray(distances, dtype=float)
    if freq_hz <= 0:
        raise DomainError(f"freq_hz must be positive, got {freq_hz}")
    if distances.size == 0:
        raise DomainError("At least one distance is required.")
    if np.any(distances <= 1.0):
        raise DomainError("All distances must exceed 1 m.")

    free_space = _free_space_db(freq_hz, distances)
    pl_los = free_space + sigma_los_db
    pl_nlos = free_space + sigma_nlos_db
    scale = 10.0 * distances.size * np.log10(distances)

    a1 = np.sum((pl_los - pl_nlos) / scale)
    offset = np.sum((pl_nlos - a_db) / scale)
    return AlphaFit(float(a1), float(offset))
