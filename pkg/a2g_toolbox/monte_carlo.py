"""Stochastic oracle for the outage expressions.

Trials are grouped into blocks of ``block_size``. Block ``b`` of stream ``s``
draws from ``np.random.default_rng([seed, s, b])``, so an estimate depends only
on the seed, the stream and the trial count, never on the worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Union

import numpy as np

from .channel_model import (
    LinkBudget,
    PropagationModel,
    path_loss_exponent,
    rician_factor,
)
from .classes import DomainError, Strategy
from .relay_network import RelayField

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000
SHARED_STREAM = 3
_STREAMS = {Strategy.DIRECT: 0, Strategy.RELAYING: 1, Strategy.COOPERATIVE: 2}


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Empirical outage probability.

    Attributes
    ----------
    p_hat : float
        Fraction of trials in outage.
    std_err : float
        Binomial standard error sqrt(p_hat (1 - p_hat) / n_trials).
    n_trials : int
    seed : int
    """

    p_hat: float
    std_err: float
    n_trials: int
    seed: int

    @classmethod
    def from_count(cls, count: int, n_trials: int, seed: int):
        p_hat = count / n_trials
        std_err = float(np.sqrt(p_hat * (1.0 - p_hat) / n_trials))
        return cls(p_hat, std_err, n_trials, seed)

    @property
    def degenerate(self) -> bool:
        return self.p_hat in (0.0, 1.0)


@dataclass(frozen=True)
class SimulationResult:
    """Shared-randomness estimates for all three strategies.

    ``decoding_set_mean`` and ``decoding_set_std_err`` describe the number of
    relays that decoded the UAV per trial.
    """

    estimates: Dict[Strategy, MonteCarloEstimate]
    decoding_set_mean: float
    decoding_set_std_err: float


class PolarPoints(NamedTuple):
    r: np.ndarray
    phi: np.ndarray


class _BlockTally(NamedTuple):
    direct: int
    relaying: int
    cooperative: int
    decoded_sum: float
    decoded_sq_sum: float


def sample_rician_power(
    k: Union[float, np.ndarray],
    rng: np.random.Generator,
    size: Optional[Union[int, tuple]] = None,
) -> np.ndarray:
    """Draws unit-mean Rician fading power.

    Parameters
    ----------
    k : float or np.ndarray
        Linear Rician factor, broadcast against ``size``.
    rng : np.random.Generator
    size : int or tuple, optional
        Output shape; defaults to the shape of ``k``.

    Returns
    -------
    np.ndarray
        Samples of (mu + sigma g1)^2 + (sigma g2)^2 with mu = sqrt(K/(K+1))
        and sigma = sqrt(1/(2(K+1))).
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("Rician factor must be nonnegative.")
    shape = np.shape(k) if size is None else size
    mu = np.sqrt(k / (k + 1.0))
    sigma = np.sqrt(0.5 / (k + 1.0))
    g1 = rng.standard_normal(shape)
    g2 = rng.standard_normal(shape)
    return (mu + sigma * g1) ** 2 + (sigma * g2) ** 2


def sample_ppp_disk(
    density: float, radius: float, rng: np.random.Generator
) -> PolarPoints:
    """Poisson point process of the given density, uniform in a disk."""
    if density < 0 or radius <= 0:
        raise DomainError("density must be nonnegative and radius positive.")
    count = rng.poisson(density * np.pi * radius**2)
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    return PolarPoints(r, phi)


def _snr(gamma, omega, length, alpha):
    with np.errstate(divide="ignore"):
        return gamma * omega / length**alpha


def _simulate_block(
    block: int,
    n: int,
    stream: int,
    seed: int,
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    relays: bool = True,
) -> _BlockTally:
    rng = np.random.default_rng([seed, stream, block])

    theta_d = np.arctan2(h, r_d)
    omega_ud = sample_rician_power(rician_factor(theta_d, model), rng, size=n)
    snr_ud = _snr(
        budget.gamma_u, omega_ud, np.hypot(r_d, h), path_loss_exponent(theta_d, model)
    )
    direct_out = snr_ud <= budget.xi
    if not relays:
        # relay columns read as an empty field
        outages = int(direct_out.sum())
        return _BlockTally(outages, n, outages, 0.0, 0.0)

    disk_radius = field.require_disk()
    counts = rng.poisson(field.density * np.pi * disk_radius**2, size=n)
    owner = np.repeat(np.arange(n), counts)
    r = disk_radius * np.sqrt(rng.random(owner.size))
    phi = 2.0 * np.pi * rng.random(owner.size)

    theta_r = np.arctan2(h, r)
    omega_ur = sample_rician_power(np.asarray(rician_factor(theta_r, model)), rng)
    snr_ur = _snr(
        budget.gamma_u,
        omega_ur,
        np.hypot(r, h),
        np.asarray(path_loss_exponent(theta_r, model)),
    )
    decoded = np.flatnonzero(snr_ur > budget.xi)

    # second-hop fading is drawn for decoding relays only
    r_dec, phi_dec = r[decoded], phi[decoded]
    ell_rd = np.sqrt(
        np.maximum(r_dec**2 + r_d**2 - 2.0 * r_dec * r_d * np.cos(phi_dec), 0.0)
    )
    omega_rd = sample_rician_power(model.kappa0, rng, size=decoded.size)
    reached = _snr(budget.gamma_r, omega_rd, ell_rd, model.alpha0) > budget.xi

    served = np.bincount(owner[decoded][reached], minlength=n) > 0
    relay_out = ~served
    decoding_set = np.bincount(owner[decoded], minlength=n).astype(float)

    return _BlockTally(
        direct=int(direct_out.sum()),
        relaying=int(relay_out.sum()),
        cooperative=int((direct_out & relay_out).sum()),
        decoded_sum=float(decoding_set.sum()),
        decoded_sq_sum=float((decoding_set**2).sum()),
    )


def _run_blocks(stream, seed, n_trials, block_size, workers, *args, relays=True):
    sizes = [
        min(block_size, n_trials - start) for start in range(0, n_trials, block_size)
    ]

    def run(block):
        size = sizes[block]
        return _simulate_block(block, size, stream, seed, *args, relays=relays)

    if workers <= 1:
        tallies = [run(block) for block in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            tallies = list(executor.map(run, range(len(sizes))))

    return _BlockTally(*(sum(column) for column in zip(*tallies)))


def _check_trials(n_trials: int, block_size: int, seed: int):
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    if n_trials < 1:
        raise DomainError(f"n_trials must be at least 1, got {n_trials}")
    if block_size < 1:
        raise DomainError(f"block_size must be at least 1, got {block_size}")


def simulate_outage(
    strategy: Strategy,
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    n_trials: int,
    seed: int,
    block_size: int = BLOCK_SIZE,
    workers: int = 1,
    shared: bool = False,
) -> MonteCarloEstimate:
    """Simulates the two-phase decode-and-forward protocol with selection
    combining and counts outages of one strategy.

    Parameters
    ----------
    strategy : Strategy
    r_d, h : float
        Destination ground distance and UAV altitude.
    field : RelayField
        Must carry an explicit disk radius.
    model : PropagationModel
    budget : LinkBudget
    n_trials : int
    seed : int
    block_size : int
        Trials per random stream block.
    workers : int
        Threads used to run blocks.
    shared : bool
        Draw from the stream shared by all strategies instead of the
        strategy's own stream.

    Returns
    -------
    MonteCarloEstimate

    Notes
    -----
    ``Strategy.DIRECT`` draws the UAV-destination fading only. Those draws come
    first in every block, so the estimate equals the direct entry of a full
    run on the same stream.
    """
    _check_trials(n_trials, block_size, seed)
    field.require_disk()
    stream = SHARED_STREAM if shared else _STREAMS[strategy]
    tally = _run_blocks(
        stream,
        seed,
        n_trials,
        block_size,
        workers,
        r_d,
        h,
        field,
        model,
        budget,
        relays=strategy is not Strategy.DIRECT,
    )
    count = {
        Strategy.DIRECT: tally.direct,
        Strategy.RELAYING: tally.relaying,
        Strategy.COOPERATIVE: tally.cooperative,
    }[strategy]

    estimate = MonteCarloEstimate.from_count(count, n_trials, seed)
    if estimate.degenerate:
        logger.warning(
            f"{strategy.value} estimate at r_d={r_d:g}, h={h:g} is {estimate.p_hat:g};"
            " its standard error is degenerate."
        )
    return estimate


def simulate_strategies(
    r_d: float,
    h: float,
    field: RelayField,
    model: PropagationModel,
    budget: LinkBudget,
    n_trials: int,
    seed: int,
    block_size: int = BLOCK_SIZE,
    workers: int = 1,
) -> SimulationResult:
    """All three strategies from one set of draws."""
    _check_trials(n_trials, block_size, seed)
    tally = _run_blocks(
        SHARED_STREAM, seed, n_trials, block_size, workers, r_d, h, field, model, budget
    )

    mean = tally.decoded_sum / n_trials
    variance = max(tally.decoded_sq_sum / n_trials - mean**2, 0.0)
    return SimulationResult(
        estimates={
            Strategy.DIRECT: MonteCarloEstimate.from_count(
                tally.direct, n_trials, seed
            ),
            Strategy.RELAYING: MonteCarloEstimate.from_count(
                tally.relaying, n_trials, seed
            ),
            Strategy.COOPERATIVE: MonteCarloEstimate.from_count(
                tally.cooperative, n_trials, seed
            ),
        },
        decoding_set_mean=mean,
        decoding_set_std_err=float(np.sqrt(variance / n_trials)),
    )
