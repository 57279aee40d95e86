from .channel_model import Geometry, LinkBudget, PropagationModel
from .classes import Strategy
from .relay_network import RelayField
from .yamlparsers import Scenario

__all__ = [
    "Geometry",
    "LinkBudget",
    "PropagationModel",
    "RelayField",
    "Scenario",
    "Strategy",
]
