"""
crab-mott - optimal control of the superfluid to Mott-insulator transition

Ramps the J/U ratio of a 1D Bose-Hubbard chain with CRAB pulses (a guess ramp
times a randomized truncated Fourier correction) optimized by a Nelder-Mead
simplex. Dynamics are simulated by exact diagonalization or by number-conserving
matrix product states (DMRG + TEBD).
"""

__version__ = "1.0.0"
__license__ = "MIT"

# Public API exports
from .models import (
    ControlTrajectory,
    FigureOfMerit,
    LatticeParams,
    PulseSpec,
    RunRecord,
    SiteProfile,
)

__all__ = [
    "ControlTrajectory",
    "FigureOfMerit",
    "LatticeParams",
    "PulseSpec",
    "RunRecord",
    "SiteProfile",
    "__version__",
]
