import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .channel_model import (
    HALF_PI,
    SPEED_OF_LIGHT,
    fit_alpha_from_pl_model,
    linear_to_db,
)
from .classes import (
    ConvergenceError,
    DomainError,
    LevelColorFormatter,
    ScenarioError,
    Strategy,
    SweepContextFilter,
    ValidationGateError,
)
from .experiments import (
    apply_alpha_fit,
    check_validation,
    config_space_table,
    optimal_altitude_table,
    outage_curve,
    power_saving_table,
    power_sweep,
    validation_table,
)
from .importers import dump_yaml, write_csv
from .relay_network import RHO_BOUNDS
from .yamlparsers import Scenario

logger = logging.getLogger(__name__)

CASE_STUDY = Path(__file__).parent / "scenarios" / "case_study.yaml"

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_CONVERGENCE = 3
EXIT_VALIDATION = 4


def disk_radius_arg(value: str) -> Union[str, float]:
    if value.lower() == "auto":
        return "auto"
    try:
        radius = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value} is not a radius or 'auto'")
    if radius <= 0:
        raise argparse.ArgumentTypeError("disk radius must be positive")
    return radius


def load_scenario(args) -> Scenario:
    scenario = Scenario.from_yaml_path(args.scenario)
    disk = getattr(args, "disk_radius", None)
    if disk is not None:
        field = scenario.relay_field.with_disk(None if disk == "auto" else disk)
        scenario = replace(scenario, relay_field=field)
    return scenario


def output_path(args, scenario: Optional[Scenario]) -> Optional[Path]:
    if args.out is not None:
        return args.out
    if scenario is not None:
        return scenario.output
    return None


def _fixed_r_d(args, scenario: Scenario) -> float:
    if args.r_d is not None:
        return args.r_d
    if scenario.sweep.r_d is not None:
        return scenario.sweep.r_d
    raise ScenarioError("Give --r-d or 'sweep.r_d' for an altitude sweep.")


def outage_curve_cmd(args):
    scenario = load_scenario(args)
    frame = outage_curve(
        scenario, _fixed_r_d(args, scenario), scenario.sweep.values(), args.workers
    )
    write_csv(frame, output_path(args, scenario))


def optimal_altitude_cmd(args):
    scenario = load_scenario(args)
    frame = optimal_altitude_table(
        scenario, Strategy.from_string(args.strategy), args.r_values, args.workers
    )
    write_csv(frame, output_path(args, scenario))


def config_space_cmd(args):
    scenario = load_scenario(args)
    xi_db = args.xi_db
    if not xi_db:
        base = float(linear_to_db(scenario.budget.xi))
        xi_db = [base, base + 10.0]
    frame = config_space_table(
        scenario,
        Strategy.from_string(args.strategy),
        np.linspace(0.0, HALF_PI, args.theta_points),
        [10.0 ** (value / 10.0) for value in xi_db],
        use_approx_inverse=args.approx_inverse,
        workers=args.workers,
    )
    write_csv(frame, output_path(args, scenario))


def power_sweep_cmd(args):
    scenario = load_scenario(args)
    frame = power_sweep(
        scenario,
        Strategy.from_string(args.strategy),
        scenario.sweep.values(),
        np.linspace(RHO_BOUNDS[0], RHO_BOUNDS[1], args.rho_points),
        args.workers,
    )
    write_csv(frame, output_path(args, scenario))


def power_saving_cmd(args):
    scenario = load_scenario(args)
    frame = power_saving_table(
        scenario,
        Strategy.from_string(args.strategy),
        args.heights,
        args.workers,
        include_optimum=not args.skip_optimum,
    )
    write_csv(frame, output_path(args, scenario))


def validate_cmd(args):
    scenario = load_scenario(args)
    n_trials = args.trials if args.trials is not None else scenario.mc.n_trials
    seed = args.seed if args.seed is not None else scenario.mc.seed
    frame = validation_table(
        scenario, args.r_values, args.heights, n_trials, seed, workers=args.workers
    )
    write_csv(frame, output_path(args, scenario))
    check_validation(frame)


def fit_alpha_cmd(args):
    distances = np.geomspace(args.d_min, args.d_max, args.d_points)
    a_db = args.a_db
    if a_db is None:
        a_db = 20.0 * np.log10(4.0 * np.pi * args.freq / SPEED_OF_LIGHT)
    fit = fit_alpha_from_pl_model(
        args.freq, args.sigma_los, args.sigma_nlos, a_db, distances
    )
    print(f"a1 = {fit.a1:.12g}")
    print(f"offset = {fit.offset:.12g}")

    if args.write is not None:
        scenario = apply_alpha_fit(Scenario.from_yaml_path(args.scenario), fit)
        dump_yaml(scenario.to_yaml_dict(), args.write)
        logger.info(f"Wrote fitted scenario to {args.write}")


def setup_logging(verbose: bool) -> None:
    package_logger = logging.getLogger("a2g_toolbox")
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.addFilter(SweepContextFilter())
    handler.setFormatter(LevelColorFormatter())
    package_logger.addHandler(handler)
    package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def build_parser() -> argparse.ArgumentParser:
    argparser = argparse.ArgumentParser(
        description="Outage, altitude and coverage studies for UAV air-to-ground"
        " links with ground relays."
    )
    common_parser = argparse.ArgumentParser(add_help=False)
    common_parser.add_argument(
        "--scenario",
        type=Path,
        default=CASE_STUDY,
        help="path to the scenario yaml (default: bundled case study)",
    )
    common_parser.add_argument(
        "--out", type=Path, default=None, help="CSV output path (default: stdout)"
    )
    common_parser.add_argument(
        "--workers", type=int, default=1, help="threads for independent sweep points"
    )
    common_parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )

    strategy_parser = argparse.ArgumentParser(add_help=False)
    strategy_parser.add_argument(
        "--strategy", choices=["dc", "rc", "cc"], default="dc", help="strategy"
    )

    disk_parser = argparse.ArgumentParser(add_help=False)
    disk_parser.add_argument(
        "--disk-radius",
        type=disk_radius_arg,
        default=None,
        help="relay disk radius in meters, or 'auto' for the self-consistent disk",
    )

    subparsers = argparser.add_subparsers(title="subcommands", dest="command")
    subparsers.required = True

    curve_parser = subparsers.add_parser(
        "outage-curve",
        parents=[common_parser, disk_parser],
        help="outage of every strategy over the altitude sweep",
    )
    curve_parser.add_argument(
        "--r-d", type=float, default=None, help="destination ground distance (m)"
    )
    curve_parser.set_defaults(func=outage_curve_cmd)

    altitude_parser = subparsers.add_parser(
        "optimal-altitude",
        parents=[common_parser, strategy_parser, disk_parser],
        help="optimal elevation angle per ground distance",
    )
    altitude_parser.add_argument(
        "--r-values",
        type=float,
        nargs="+",
        default=[250.0, 500.0, 1000.0, 1500.0, 2000.0],
        help="ground distances (m)",
    )
    altitude_parser.set_defaults(func=optimal_altitude_cmd)

    config_parser = subparsers.add_parser(
        "config-space",
        parents=[common_parser, strategy_parser, disk_parser],
        help="configuration curves (r_c, h) for several SNR thresholds",
    )
    config_parser.add_argument(
        "--theta-points", type=int, default=64, help="elevation grid size"
    )
    config_parser.add_argument(
        "--xi-db",
        type=float,
        action="append",
        default=None,
        help="SNR threshold in dB, repeatable (default: scenario xi and xi + 10 dB)",
    )
    config_parser.add_argument(
        "--approx-inverse",
        action="store_true",
        help="use the closed-form inverse Marcum approximation",
    )
    config_parser.set_defaults(func=config_space_cmd)

    power_parser = subparsers.add_parser(
        "power-sweep",
        parents=[common_parser, disk_parser],
        help="coverage radius over altitude and UAV power share",
    )
    power_parser.add_argument(
        "--strategy", choices=["rc", "cc"], default="cc", help="strategy"
    )
    power_parser.add_argument(
        "--rho-points", type=int, default=12, help="power-share grid size"
    )
    power_parser.set_defaults(func=power_sweep_cmd)

    saving_parser = subparsers.add_parser(
        "power-saving",
        parents=[common_parser, disk_parser],
        help="UAV power saving and coverage gain of relaying over the direct link",
    )
    saving_parser.add_argument(
        "--strategy", choices=["rc", "cc"], default="cc", help="strategy"
    )
    saving_parser.add_argument(
        "--heights",
        type=float,
        nargs="+",
        default=[200.0],
        help="altitudes (m)",
    )
    saving_parser.add_argument(
        "--skip-optimum",
        action="store_true",
        help="leave out the joint-optimum row",
    )
    saving_parser.set_defaults(func=power_saving_cmd)

    validate_parser = subparsers.add_parser(
        "validate",
        parents=[common_parser, disk_parser],
        help="compare analytic outage against Monte Carlo",
    )
    validate_parser.add_argument("--trials", type=int, default=None, help="trials")
    validate_parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    validate_parser.add_argument(
        "--r-values",
        type=float,
        nargs="+",
        default=[250.0, 500.0, 1000.0, 1500.0],
        help="ground distances (m)",
    )
    validate_parser.add_argument(
        "--heights",
        type=float,
        nargs="+",
        default=[100.0, 300.0, 700.0, 1300.0],
        help="altitudes (m)",
    )
    validate_parser.set_defaults(func=validate_cmd)

    fit_parser = subparsers.add_parser(
        "fit-alpha",
        parents=[common_parser],
        help="fit the path-loss exponent to a LoS/NLoS excess-loss model",
    )
    fit_parser.add_argument("--freq", type=float, default=2e9, help="carrier (Hz)")
    fit_parser.add_argument(
        "--sigma-los", type=float, default=1.0, help="LoS excess loss (dB)"
    )
    fit_parser.add_argument(
        "--sigma-nlos", type=float, default=20.0, help="NLoS excess loss (dB)"
    )
    fit_parser.add_argument(
        "--a-db",
        type=float,
        default=None,
        help="model constant A in dB (default: free-space loss at 1 m)",
    )
    fit_parser.add_argument("--d-min", type=float, default=100.0, help="meters")
    fit_parser.add_argument("--d-max", type=float, default=3000.0, help="meters")
    fit_parser.add_argument("--d-points", type=int, default=30, help="distances")
    fit_parser.add_argument(
        "--write",
        type=Path,
        default=None,
        help="write a copy of --scenario with the fitted exponent",
    )
    fit_parser.set_defaults(func=fit_alpha_cmd)

    return argparser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        args.func(args)
    except (ScenarioError, DomainError, FileNotFoundError) as ex:
        logger.error(str(ex))
        return EXIT_SCENARIO
    except ConvergenceError as ex:
        logger.error(str(ex))
        return EXIT_CONVERGENCE
    except ValidationGateError as ex:
        logger.error(str(ex))
        return EXIT_VALIDATION
    return EXIT_OK
