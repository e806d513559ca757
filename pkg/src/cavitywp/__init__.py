"""Wave-packet simulation of cavity QED models in the quadrature representation."""
from ._kernels import BACKEND
from .grid import Grid, make_grid, to_momentum, to_position
from .models import ModelSpec, SplitHamiltonian, split_for
from .observables import ObservableSeries, detect_revivals
from .propagator import PropagationConfig, propagate
from .states import (
    MultiChannelWavefunction,
    coherent_state,
    compose_initial,
    fock_state,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Grid",
    "ModelSpec",
    "MultiChannelWavefunction",
    "ObservableSeries",
    "PropagationConfig",
    "SplitHamiltonian",
    "coherent_state",
    "compose_initial",
    "detect_revivals",
    "fock_state",
    "make_grid",
    "propagate",
    "split_for",
    "to_momentum",
    "to_position",
]
