"""Tape-based reverse mode with hyper-dual input derivatives."""
from .tape import NumericRangeError, Tape, TapeMismatchError, Variable
from .hyperdual import HyperDual, lift_input
from .stack import PINN_LAYOUT, VALUES_ONLY, StackLayout
from . import kernels

__all__ = [
    "HyperDual",
    "NumericRangeError",
    "PINN_LAYOUT",
    "StackLayout",
    "Tape",
    "TapeMismatchError",
    "VALUES_ONLY",
    "Variable",
    "kernels",
    "lift_input",
]
