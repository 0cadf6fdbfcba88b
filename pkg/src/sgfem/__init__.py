"""Nonconforming H2 finite elements for linear strain gradient elasticity."""

from sgfem.element import ElementVariant, LocalBasis, local_basis
from sgfem.mesh import Mesh, EdgeTopology, build_topology, perturbed_mesh, uniform_mesh
from sgfem.model import MaterialParams, SolutionJet

__all__ = [
    "ElementVariant",
    "LocalBasis",
    "local_basis",
    "Mesh",
    "EdgeTopology",
    "build_topology",
    "uniform_mesh",
    "perturbed_mesh",
    "MaterialParams",
    "SolutionJet",
]

__version__ = "0.1.0"
