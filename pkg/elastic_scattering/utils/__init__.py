"""Numerical building blocks: surfaces, harmonics, quadrature, kernels and the solver."""

from .assembly import assemble_system, build_context
from .fields import IncidentField, ObservationGrid, farfield_from_densities
from .geometry import get_surface
from .kernels import ElasticMedium
from .solver import solve

__all__ = [
    "ElasticMedium",
    "IncidentField",
    "ObservationGrid",
    "assemble_system",
    "build_context",
    "farfield_from_densities",
    "get_surface",
    "solve",
]
