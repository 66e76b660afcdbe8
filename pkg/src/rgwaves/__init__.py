"""Convective waves of the Richard-Gavrilyuk shallow-water model.

Modules: model (state conversions, flux, source), equilibrium (reduced 2x2
system and its Riemann problem), profiles (convective-wave construction),
spectral and evans (stability criteria, Evans function, eigenvalue counts),
solver (finite-volume time evolution), presets/io/cli (experiments and the
command-line tool).
"""

__version__ = "0.1.0"

from .errors import RGError  # noqa: E402,F401
from .model import PhysParams, PrimitiveState, ConservedState  # noqa: E402,F401
