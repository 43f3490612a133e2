"""Virtual-element discontinuous Galerkin solver for compressible flow on
polygonal meshes, with ADER and Runge-Kutta time marching."""

from .gas import AdmissibilityError, GasModel
from .mesh import MeshError, MeshParseError, PolyMesh, build_voronoi, generate_mesh, load_mesh, save_mesh
from .solver import Discretization, Field, Solver, SolverOptions
from .vem import CellBasis, DegenerateCellError, ModalBasis, build_basis

__version__ = "0.1.0"
