import sys
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd
import yaml

from .classes import ScenarioError


def validate_path(path_string: Union[str, Path]) -> Path:
    """Validates that incoming path exists.

    Parameters
    ----------
    path_string : str

    Returns
    -------
    path: Path

    Raises
    ------
    FileNotFoundError

    """
    path = Path(path_string)
    if path.exists():
        return path
    else:
        raise FileNotFoundError(f"No such file: {path_string}")


def load_yaml(path: Union[Path, str]) -> Dict:
    """Parses a scenario file into a dictionary.

    Parameters
    ----------
    path : Path

    Returns
    -------
    Dict

    Raises
    ------
    ScenarioError
        Raised on YAML syntax errors, with the line number reported by the
        parser, or if the document is not a mapping.
    """
    path = validate_path(path)

    with open(path, encoding="utf-8") as file:
        try:
            data = yaml.safe_load(file)
        except yaml.MarkedYAMLError as ex:
            line = ex.problem_mark.line + 1 if ex.problem_mark else "?"
            raise ScenarioError(f"{path}: syntax error at line {line}: {ex.problem}")
        except yaml.YAMLError as ex:
            raise ScenarioError(f"{path}: {ex}")

    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected a mapping of scenario sections.")
    return data


def dump_yaml(data: Dict, path: Union[Path, str]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as file:
        yaml.safe_dump(data, file, sort_keys=False)
    return path


def write_csv(frame: pd.DataFrame, path: Optional[Union[Path, str]] = None) -> None:
    """Writes a result table with 12 significant digits and LF line endings,
    to stdout if no path is given."""
    options = dict(index=False, float_format="%.12g", lineterminator="\n")
    if path is None:
        frame.to_csv(sys.stdout, **options)
    else:
        frame.to_csv(Path(path), **options)
