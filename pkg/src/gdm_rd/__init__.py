"""Gradient discretisation of anisotropic reaction-diffusion on polytopal meshes."""

from .core import (Discretisation, SpaceTimeDofs, TimeGrid, assemble_mass, assemble_stiffness,
                   discrete_norm, interpolate_initial, total_mass)
from .cr import CrDiscretisation, build_cr
from .errors import GdmError
from .hmm import HmmDiscretisation, build_hmm, face_fluxes
from .mesh import PolytopalMesh, build_polytopal_mesh, generate_mesh, preset_mesh
from .physics import DiffusionField, ReactionTerm, TensorParams, diffusion_tensor, glioma_initial
from .solver import BoundaryCondition, SolverConfig, run_simulation

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "CrDiscretisation", "DiffusionField", "Discretisation", "GdmError",
    "HmmDiscretisation", "PolytopalMesh", "ReactionTerm", "SolverConfig", "SpaceTimeDofs",
    "TensorParams", "TimeGrid", "assemble_mass", "assemble_stiffness", "build_cr", "build_hmm",
    "build_polytopal_mesh", "diffusion_tensor", "discrete_norm", "face_fluxes", "generate_mesh",
    "glioma_initial", "interpolate_initial", "preset_mesh", "run_simulation", "total_mass",
]
