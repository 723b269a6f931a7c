"""Two-phase inexact-restoration training for physics-informed networks."""

from .adam import AdamConfig, AdamState, adam_step
from .net import Jet2, MLPConfig, forward, forward_jet, grad_params, init_params
from .problems import get_problem, reference_burgers, reference_heat
from .two_phase import IRConfig, penalty_phi, train, update_theta

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "AdamState",
    "IRConfig",
    "Jet2",
    "MLPConfig",
    "adam_step",
    "forward",
    "forward_jet",
    "get_problem",
    "grad_params",
    "init_params",
    "penalty_phi",
    "reference_burgers",
    "reference_heat",
    "train",
    "update_theta",
]
