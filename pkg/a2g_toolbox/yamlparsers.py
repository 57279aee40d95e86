from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
from typing_extensions import Self

import numpy as np

from .channel_model import LinkBudget, PropagationModel, db_to_linear
from .classes import DomainError, ScenarioError, SweepScale
from .importers import load_yaml
from .relay_network import RelayField

_SECTIONS = ("propagation", "budget", "relay_field", "sweep", "monte_carlo", "output")
_REQUIRED_SECTIONS = ("propagation", "budget", "relay_field")
# every sweeping command runs over altitude
_SWEEP_VARIABLES = ("h",)


def _reject_unknown(section: str, data: Dict, allowed) -> None:
    for key in data:
        if key not in allowed:
            raise ScenarioError(f"Unknown key '{key}' in section '{section}'.")


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"'{section}.{key}' must be a number, got {value!r}.")
    if not np.isfinite(value):
        raise ScenarioError(f"'{section}.{key}' must be finite.")
    return float(value)


def _integer(section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"'{section}.{key}' must be an integer, got {value!r}.")
    return value


def _linear(section: str, data: Dict, key: str, default=None) -> Optional[float]:
    """Reads ``key`` as a linear value or ``key_db`` as a dB value."""
    db_key = f"{key}_db"
    if key in data and db_key in data:
        raise ScenarioError(f"Give either '{key}' or '{db_key}' in '{section}'.")
    if key in data:
        return _number(section, key, data[key])
    if db_key in data:
        return float(db_to_linear(_number(section, db_key, data[db_key])))
    if default is None:
        raise ScenarioError(f"Missing key '{key}' (or '{db_key}') in '{section}'.")
    return default


def _required(section: str, data: Dict, key: str) -> Any:
    try:
        return data[key]
    except KeyError:
        raise ScenarioError(f"Missing key '{key}' in '{section}'.")


@dataclass(frozen=True)
class SweepAxis:
    """Altitude grid plus the destination distance held fixed."""

    variable: str = "h"
    start: float = 10.0
    stop: float = 3000.0
    points: int = 32
    scale: SweepScale = SweepScale.LOG
    r_d: Optional[float] = None

    def __post_init__(self):
        if self.variable not in _SWEEP_VARIABLES:
            raise ScenarioError(
                f"'sweep.variable' must be one of {_SWEEP_VARIABLES}, got"
                f" {self.variable!r}."
            )
        if self.points < 2:
            raise ScenarioError(f"'sweep.points' must be at least 2, got {self.points}")
        if self.stop <= self.start:
            raise ScenarioError("'sweep.stop' must exceed 'sweep.start'.")
        if self.scale is SweepScale.LOG and self.start <= 0:
            raise ScenarioError("'sweep.start' must be positive for a log sweep.")

    def values(self) -> np.ndarray:
        if self.scale is SweepScale.LOG:
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_trials: int = 100_000
    seed: int = 0
    block_size: int = 1000

    def __post_init__(self):
        if self.n_trials < 1:
            raise ScenarioError("'monte_carlo.n_trials' must be positive.")
        if self.seed < 0:
            raise ScenarioError("'monte_carlo.seed' must be nonnegative.")
        if self.block_size < 1:
            raise ScenarioError("'monte_carlo.block_size' must be positive.")


@dataclass(frozen=True)
class Scenario:
    """Every parameter of a study, converted to linear units on load.

    Attributes
    ----------
    propagation : PropagationModel
    budget : LinkBudget
    relay_field : RelayField
        ``disk_radius`` is None when the file says ``auto``.
    sweep : SweepAxis
    mc : MonteCarloConfig
    total_budget_gamma : float
        Total SNR budget shared by UAV and relays in power-allocation studies.
        Defaults to the UAV budget.
    output : Optional[Path]

    Methods
    -------
    from_yaml_dict(yaml_config: Dict)
        Generates a class instance from a dictionary
    from_yaml_path(path: Union[Path, str])
        Generates a class instance from a path to a .yaml file.
    to_yaml_dict()
        Serializes the instance with linear-valued keys, so that
        from_yaml_dict(to_yaml_dict()) reproduces it exactly.
    """

    propagation: PropagationModel
    budget: LinkBudget
    relay_field: RelayField
    sweep: SweepAxis = field(default_factory=SweepAxis)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    total_budget_gamma: Optional[float] = None
    output: Optional[Path] = None

    def __post_init__(self):
        if self.total_budget_gamma is None:
            object.__setattr__(self, "total_budget_gamma", self.budget.gamma_u)

    @staticmethod
    def _parse_propagation(data: Dict) -> PropagationModel:
        section = "propagation"
        _reject_unknown(
            section,
            data,
            (
                "kappa0",
                "kappa0_db",
                "kappa_half_pi",
                "kappa_half_pi_db",
                "alpha0",
                "alpha_half_pi",
                "a2",
                "b2",
                "exact_fit",
            ),
        )
        exact_fit = data.get("exact_fit", True)
        if not isinstance(exact_fit, bool):
            raise ScenarioError("'propagation.exact_fit' must be true or false.")
        return PropagationModel(
            kappa0=_linear(section, data, "kappa0"),
            kappa_half_pi=_linear(section, data, "kappa_half_pi"),
            alpha0=_number(section, "alpha0", _required(section, data, "alpha0")),
            alpha_half_pi=_number(
                section, "alpha_half_pi", _required(section, data, "alpha_half_pi")
            ),
            a2=_number(section, "a2", data.get("a2", 10.0)),
            b2=_number(section, "b2", data.get("b2", 3.0)),
            exact_fit=exact_fit,
        )

    @staticmethod
    def _parse_budget(data: Dict):
        section = "budget"
        _reject_unknown(
            section,
            data,
            (
                "gamma_u",
                "gamma_u_db",
                "gamma_r",
                "gamma_r_db",
                "xi",
                "xi_db",
                "epsilon",
                "total_gamma",
                "total_gamma_db",
            ),
        )
        budget = LinkBudget(
            gamma_u=_linear(section, data, "gamma_u"),
            gamma_r=_linear(section, data, "gamma_r"),
            xi=_linear(section, data, "xi"),
            epsilon=_number(section, "epsilon", _required(section, data, "epsilon")),
        )
        total = _linear(section, data, "total_gamma", default=budget.gamma_u)
        if total <= 0:
            raise ScenarioError("'budget.total_gamma' must be positive.")
        return budget, total

    @staticmethod
    def _parse_relay_field(data: Dict) -> RelayField:
        section = "relay_field"
        _reject_unknown(section, data, ("density", "disk_radius"))
        disk = data.get("disk_radius", "auto")
        if disk == "auto":
            disk_radius = None
        else:
            disk_radius = _number(section, "disk_radius", disk)
        return RelayField(
            density=_number(section, "density", _required(section, data, "density")),
            disk_radius=disk_radius,
        )

    @staticmethod
    def _parse_sweep(data: Dict) -> SweepAxis:
        section = "sweep"
        _reject_unknown(
            section, data, ("variable", "start", "stop", "points", "scale", "r_d")
        )
        defaults = SweepAxis()
        try:
            scale = SweepScale.from_string(str(data.get("scale", defaults.scale.value)))
        except ValueError as ex:
            raise ScenarioError(f"'sweep.scale': {ex}")

        r_d = None
        if data.get("r_d") is not None:
            r_d = _number(section, "r_d", data["r_d"])
            if r_d < 0:
                raise ScenarioError("'sweep.r_d' must be nonnegative.")

        return SweepAxis(
            variable=str(data.get("variable", defaults.variable)),
            start=_number(section, "start", data.get("start", defaults.start)),
            stop=_number(section, "stop", data.get("stop", defaults.stop)),
            points=_integer(section, "points", data.get("points", defaults.points)),
            scale=scale,
            r_d=r_d,
        )

    @staticmethod
    def _parse_monte_carlo(data: Dict) -> MonteCarloConfig:
        section = "monte_carlo"
        _reject_unknown(section, data, ("n_trials", "seed", "block_size"))
        defaults = MonteCarloConfig()
        return MonteCarloConfig(
            n_trials=_integer(
                section, "n_trials", data.get("n_trials", defaults.n_trials)
            ),
            seed=_integer(section, "seed", data.get("seed", defaults.seed)),
            block_size=_integer(
                section, "block_size", data.get("block_size", defaults.block_size)
            ),
        )

    @classmethod
    def from_yaml_dict(cls, yaml_config: Dict) -> Self:
        """Builds a Scenario from the parsed YAML mapping.

        Raises
        ------
        ScenarioError
            Raised on unknown sections or keys, missing sections or keys, and
            out-of-range values. The message names the offending key.
        """
        if not isinstance(yaml_config, dict):
            raise ScenarioError("A scenario must be a mapping of sections.")
        _reject_unknown("<root>", yaml_config, _SECTIONS)
        for section in _REQUIRED_SECTIONS:
            if section not in yaml_config:
                raise ScenarioError(f"Missing section '{section}'.")

        sections = {}
        for section in _SECTIONS:
            data = yaml_config.get(section) or {}
            if not isinstance(data, dict):
                raise ScenarioError(f"Section '{section}' must be a mapping.")
            sections[section] = data

        try:
            propagation = cls._parse_propagation(sections["propagation"])
        except DomainError as ex:
            raise ScenarioError(f"propagation: {ex}")
        try:
            budget, total = cls._parse_budget(sections["budget"])
        except DomainError as ex:
            raise ScenarioError(f"budget: {ex}")
        try:
            relay_field = cls._parse_relay_field(sections["relay_field"])
        except DomainError as ex:
            raise ScenarioError(f"relay_field: {ex}")

        _reject_unknown("output", sections["output"], ("path",))
        output = sections["output"].get("path")

        return cls(
            propagation=propagation,
            budget=budget,
            relay_field=relay_field,
            sweep=cls._parse_sweep(sections["sweep"]),
            mc=cls._parse_monte_carlo(sections["monte_carlo"]),
            total_budget_gamma=total,
            output=Path(output) if output is not None else None,
        )

    @classmethod
    def from_yaml_path(cls, path: Union[Path, str]) -> Self:
        config = load_yaml(path)
        return cls.from_yaml_dict(config)

    def to_yaml_dict(self) -> Dict:
        prop, budget = self.propagation, self.budget
        data = {
            "propagation": {
                "kappa0": prop.kappa0,
                "kappa_half_pi": prop.kappa_half_pi,
                "alpha0": prop.alpha0,
                "alpha_half_pi": prop.alpha_half_pi,
                "a2": prop.a2,
                "b2": prop.b2,
                "exact_fit": prop.exact_fit,
            },
            "budget": {
                "gamma_u": budget.gamma_u,
                "gamma_r": budget.gamma_r,
                "xi": budget.xi,
                "epsilon": budget.epsilon,
                "total_gamma": self.total_budget_gamma,
            },
            "relay_field": {
                "density": self.relay_field.density,
                "disk_radius": (
                    "auto"
                    if self.relay_field.disk_radius is None
                    else self.relay_field.disk_radius
                ),
            },
            "sweep": {
                "variable": self.sweep.variable,
                "start": self.sweep.start,
                "stop": self.sweep.stop,
                "points": self.sweep.points,
                "scale": self.sweep.scale.value,
                "r_d": self.sweep.r_d,
            },
            "monte_carlo": {
                "n_trials": self.mc.n_trials,
                "seed": self.mc.seed,
                "block_size": self.mc.block_size,
            },
        }
        if self.output is not None:
            data["output"] = {"path": str(self.output)}
        return data
