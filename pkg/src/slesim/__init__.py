"""Schroedinger-Langevin equation simulator for 1D oscillators in a thermal bath."""

__version__ = "0.1.0"

from .errors import SLEError  # noqa: E402
from .lattice import SpatialGrid, WaveField, default_grid  # noqa: E402
from .spectrum import Eigenbasis, Potential, eigenbasis  # noqa: E402
from .noise import NoiseSpec  # noqa: E402
from .propagator import SLEStepConfig, evolve, step  # noqa: E402
from .ensemble import InitialState, RunConfig, run_ensemble, run_realization  # noqa: E402

__all__ = [
    "__version__",
    "SLEError",
    "SpatialGrid",
    "WaveField",
    "default_grid",
    "Eigenbasis",
    "Potential",
    "eigenbasis",
    "NoiseSpec",
    "SLEStepConfig",
    "evolve",
    "step",
    "InitialState",
    "RunConfig",
    "run_ensemble",
    "run_realization",
]
