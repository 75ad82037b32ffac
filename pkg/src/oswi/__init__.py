"""Activation-aware initialization for odd-sigmoid networks."""

from .activations import (CATALOG, ActivationSpec, check_odd_sigmoid, derivative, evaluate,
                          format_spec, omega, parse_spec)
from .calibration import calibrate, lr_band, negative_rate, sigma_star
from .dynamics import iterate, solve_xi, stochastic_floor_probability
from .initializers import InitScheme, init_layer, layer_weights
from .network import MLP, NetworkConfig, TrainConfig, train
from .propagation import ffnn_chain, scalar_chain, spread_metric

__version__ = "0.1.0"

__all__ = [
    "CATALOG", "ActivationSpec", "check_odd_sigmoid", "derivative", "evaluate", "format_spec",
    "omega", "parse_spec", "calibrate", "lr_band", "negative_rate", "sigma_star", "iterate",
    "solve_xi", "stochastic_floor_probability", "InitScheme", "init_layer", "layer_weights",
    "MLP", "NetworkConfig", "TrainConfig", "train", "ffnn_chain", "scalar_chain",
    "spread_metric",
]
