"""Complex-trajectory quantum dynamics with a truncated velocity-derivative hierarchy.

The package propagates quantum trajectories in the complex plane, finds
all complex starting points whose trajectories land on prescribed real
final positions, and rebuilds the wavefunction there as a superposition
of per-branch contributions exp(i S / hbar), validated against an exact
split-operator grid propagator.
"""

from .core import backend_name
from .dynamics import GaussianWavepacket, PhysicalConstants, TrajectoryState
from .potentials import EckartBarrier, FreeParticle, HarmonicWell

__version__ = "0.1.0"

__all__ = [
    "GaussianWavepacket",
    "PhysicalConstants",
    "TrajectoryState",
    "EckartBarrier",
    "FreeParticle",
    "HarmonicWell",
    "backend_name",
    "__version__",
]
