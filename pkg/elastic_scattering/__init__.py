"""Spectral Galerkin solver for elastic scattering by a rigid obstacle."""

__all__ = ["utils", "experiments"]
