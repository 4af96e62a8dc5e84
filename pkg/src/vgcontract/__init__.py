"""Reflected voltage-conductance neuron model: simulation, couplings and contraction checks."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("vgcontract")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"

from .errors import (ArgumentError, DomainError, NumericError, ParameterError,  # noqa: E402
                     PreconditionError, ValidationError, VGError)
from .model import AffineClamped, Constant, Logistic, ModelParams, State  # noqa: E402
from .integrator import SimConfig, ensemble, simulate, step  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "__version__", "BACKEND",
    "VGError", "ValidationError", "DomainError", "ParameterError", "ArgumentError",
    "PreconditionError", "NumericError",
    "Constant", "Logistic", "AffineClamped", "ModelParams", "State",
    "SimConfig", "step", "simulate", "ensemble",
]
