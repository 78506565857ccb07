"""Free boundary minimal surfaces in the unit ball: meshes, symmetry groups, sweepouts and spectra."""

import logging

from .catenoid import solve_critical_catenoid
from .mesh import TriMesh, area, topology
from .symmetry import SymmetryGroup, group_from_catalog

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = ["TriMesh", "SymmetryGroup", "area", "group_from_catalog", "solve_critical_catenoid", "topology"]
__version__ = "0.1.0"
