"""Numerical laboratory for mean-field boson dynamics.

Subpackages by topic:

* :mod:`~hartreelab.lattice`, :mod:`~hartreelab.potential` - periodic grids and interaction kernels
* :mod:`~hartreelab.hartree`, :mod:`~hartreelab.decay` - the mean-field solver and decay analysis
* :mod:`~hartreelab.fock`, :mod:`~hartreelab.fluctuation` - truncated Fock space and fluctuation dynamics
* :mod:`~hartreelab.manybody` - exact N-boson dynamics on a small lattice
"""
__version__ = "0.1.0"

from .errors import (BoxTooSmallError, CoverageError, DomainError, HartreeLabError,  # noqa: E402
                     InfeasibleError, KrylovBreakdown, StructuralError, TruncationError)
from .lattice import Field, Grid, gaussian  # noqa: E402
from .potential import PotentialSpec  # noqa: E402
from .hartree import HartreeState, ObservableRecord, SolverConfig, evolve  # noqa: E402
from .occupation import BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "BoxTooSmallError", "CoverageError", "DomainError", "Field", "Grid", "HartreeLabError",
    "HartreeState", "InfeasibleError", "KrylovBreakdown", "ObservableRecord", "PotentialSpec",
    "SolverConfig", "StructuralError", "TruncationError", "evolve", "gaussian",
]
