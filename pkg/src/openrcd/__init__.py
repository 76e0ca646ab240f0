"""Random coordinate descent for resource allocation in open multi-agent systems."""

from .functions import ConvexitySpec, CostFunction, PiecewiseQuadratic, sample_random
from .graph import Network, Spectrum, build_spectrum, seminorm_sq, effective_resistance
from .solver import Minimizer, solve
from .engine import EventConfig, OpenSystem, SystemState, run_ensemble, run_realization

__version__ = "0.1.0"

__all__ = [
    "ConvexitySpec",
    "CostFunction",
    "PiecewiseQuadratic",
    "sample_random",
    "Network",
    "Spectrum",
    "build_spectrum",
    "seminorm_sq",
    "effective_resistance",
    "Minimizer",
    "solve",
    "EventConfig",
    "OpenSystem",
    "SystemState",
    "run_ensemble",
    "run_realization",
]
