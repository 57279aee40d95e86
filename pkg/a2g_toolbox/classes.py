import logging
import threading
from enum import Enum


class Strategy(Enum):
    DIRECT = "dc"
    RELAYING = "rc"
    COOPERATIVE = "cc"

    @staticmethod
    def from_string(label: str):
        """Creates an instance of this class from a string. Provides support
        for aliases.

        Parameters
        ----------
        label : str

        Returns
        -------
        ClassInstance
        """
        _ALIASES = {
            Strategy.DIRECT: ("DC", "DIRECT"),
            Strategy.RELAYING: ("RC", "RELAY", "RELAYING"),
            Strategy.COOPERATIVE: ("CC", "COOP", "COOPERATIVE"),
        }
        for enum_type in _ALIASES.keys():
            if label.upper() in _ALIASES[enum_type]:
                return enum_type
        else:
            raise ValueError(f"{label} is not a valid Strategy")


class SweepScale(Enum):
    LINEAR = "linear"
    LOG = "log"

    @staticmethod
    def from_string(label: str):
        _ALIASES = {
            "lin": SweepScale.LINEAR,
            "linear": SweepScale.LINEAR,
            "log": SweepScale.LOG,
            "geometric": SweepScale.LOG,
        }
        try:
            return _ALIASES[label.lower()]
        except KeyError:
            raise ValueError(f"{label} is not a valid sweep scale")


class DomainError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None, oscillating=False):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.oscillating = oscillating


class NoRootError(ConvergenceError):
    pass


class ValidationGateError(RuntimeError):
    pass


class SweepContextFilter(logging.Filter):
    """Stamps each record with the index of the sweep point being evaluated by
    the emitting thread."""

    def __init__(self, name: str = ""):
        super().__init__(name)
        self._local = threading.local()

    @property
    def curr_point(self):
        return getattr(self._local, "point", None)

    @curr_point.setter
    def curr_point(self, value):
        self._local.point = value

    def filter(self, record: logging.LogRecord) -> bool:
        record.point = self.curr_point if self.curr_point is not None else "-"
        return True


class LevelColorFormatter(logging.Formatter):

    grey = "\x1b[38;20m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"
    format = "Point: %(point)-8s %(message)s"

    FORMATS = {
        logging.DEBUG: grey + format + reset,
        logging.INFO: grey + format + reset,
        logging.WARNING: yellow + format + reset,
        logging.ERROR: red + format + reset,
        logging.CRITICAL: bold_red + format + reset,
    }

    def format(self, record):
        log_fmt = self.FORMATS.get(record.levelno)
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)
