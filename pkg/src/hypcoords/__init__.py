"""Finite-time hyperbolic coordinates of planar maps.

Frames of most contracted / most expanded directions along orbits,
quasi-hyperbolicity certificates with their constants ledger, and
numerical verification of the convergence and slow-variation bounds.
"""

from .cocycle import MatrixCocycle, OrbitSegment, ScaledMatrix, compute_orbit
from .certificate import ConstantsLedger, Flavor, auxiliary_constants, fit_constants
from .hypframe import HyperbolicFrame, hyperbolic_coordinates
from .planar_maps import BUILTIN_MAPS, MapSpec, make_map

__all__ = [
    "BUILTIN_MAPS",
    "ConstantsLedger",
    "Flavor",
    "HyperbolicFrame",
    "MapSpec",
    "MatrixCocycle",
    "OrbitSegment",
    "ScaledMatrix",
    "auxiliary_constants",
    "compute_orbit",
    "fit_constants",
    "hyperbolic_coordinates",
    "make_map",
]

__version__ = "0.1.0"
