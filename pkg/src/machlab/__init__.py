"""Low-Mach compressible vs incompressible Euler laboratory."""

from .harness import __version__
from .leray import P, Q, leray_project
from .pressure import PressureLaw
from .spectral import Geometry, Grid, ScalarField, VectorField, make_grid

__all__ = ["Geometry", "Grid", "P", "PressureLaw", "Q", "ScalarField", "VectorField",
           "__version__", "leray_project", "make_grid"]
