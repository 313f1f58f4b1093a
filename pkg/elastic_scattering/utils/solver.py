"""Dense direct solve of the Galerkin system and synthesis of the densities."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from .geometry import POLE_TOLERANCE, ParametrizedSurface, unit_sphere_point
from .rotation import tangent_transport
from .quadrature import synthesize_scalar
from .sphharm import grad_sph_harm, harmonic_table, tangent_basis

if TYPE_CHECKING:  # pragma: no cover
    from .assembly import BlockSystem

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10


class SingularSystemError(RuntimeError):
    """Raised when the factorisation meets an exactly singular pivot."""


@dataclass(frozen=True)
class HarmonicLayout:
    """Unknown ordering: (l, j) lexicographic for Y, then Z^(1), then Z^(2) with l >= 1."""

    n: int

    @property
    def scalar(self) -> Tuple[np.ndarray, np.ndarray]:
        return _indices(self.n, 0)

    @property
    def tangential(self) -> Tuple[np.ndarray, np.ndarray]:
        return _indices(self.n, 1)

    @property
    def ny(self) -> int:
        return (self.n + 1) ** 2

    @property
    def nz(self) -> int:
        return (self.n + 1) ** 2 - 1

    @property
    def dimension(self) -> int:
        return self.ny + 2 * self.nz

    def scalar_index(self, l: int, j: int) -> int:
        return l * l + l + j

    def tangential_index(self, l: int, j: int, k: int) -> int:
        return self.ny + (k - 1) * self.nz + l * l + l + j - 1


@lru_cache(maxsize=None)
def _indices(n: int, lmin: int) -> Tuple[np.ndarray, np.ndarray]:
    pairs = [(l, j) for l in range(lmin, n + 1) for j in range(-l, l + 1)]
    degrees = np.array([l for l, _ in pairs], dtype=int)
    orders = np.array([j for _, j in pairs], dtype=int)
    degrees.setflags(write=False)
    orders.setflags(write=False)
    return degrees, orders


def harmonic_layout(n: int) -> HarmonicLayout:
    return HarmonicLayout(n)


@dataclass(frozen=True)
class HarmonicCoefficients:
    """w_{lj} for the scalar density and W_{ljk} for the tangential one.

    Both are stored on the padded grid ``[l, j + n]`` (``tangential`` carries a
    leading axis for k = 1, 2); entries outside the index set are zero.
    """

    n: int
    scalar: np.ndarray
    tangential: np.ndarray
    surface: Optional[ParametrizedSurface] = field(default=None, repr=False)
    solve_seconds: float = 0.0

    @classmethod
    def zeros(cls, n: int, surface: Optional[ParametrizedSurface] = None) -> "HarmonicCoefficients":
        return cls(
            n=n,
            scalar=np.zeros((n + 1, 2 * n + 1), dtype=complex),
            tangential=np.zeros((2, n + 1, 2 * n + 1), dtype=complex),
            surface=surface,
        )

    @classmethod
    def from_vector(
        cls, vector: np.ndarray, n: int, surface: Optional[ParametrizedSurface] = None
    ) -> "HarmonicCoefficients":
        layout = harmonic_layout(n)
        vector = np.asarray(vector, dtype=complex)
        if vector.shape != (layout.dimension,):
            raise ValueError(f"Expected a vector of length {layout.dimension}, got {vector.shape}.")
        coeffs = cls.zeros(n, surface)
        sl, sj = layout.scalar
        tl, tj = layout.tangential
        coeffs.scalar[sl, sj + n] = vector[: layout.ny]
        for k in range(2):
            start = layout.ny + k * layout.nz
            coeffs.tangential[k, tl, tj + n] = vector[start : start + layout.nz]
        return coeffs

    def to_vector(self) -> np.ndarray:
        layout = harmonic_layout(self.n)
        sl, sj = layout.scalar
        tl, tj = layout.tangential
        return np.concatenate(
            [self.scalar[sl, sj + self.n]] + [self.tangential[k, tl, tj + self.n] for k in range(2)]
        )

    def to_frame(self) -> pd.DataFrame:
        """Rows (l, j, k, re, im); k = 0 marks scalar coefficients."""

        layout = harmonic_layout(self.n)
        sl, sj = layout.scalar
        tl, tj = layout.tangential
        values = self.to_vector()
        frame = pd.DataFrame(
            {
                "l": np.concatenate([sl, tl, tl]),
                "j": np.concatenate([sj, tj, tj]),
                "k": np.concatenate([np.zeros_like(sl), np.ones_like(tl), 2 * np.ones_like(tl)]),
            }
        )
        frame["re"] = values.real
        frame["im"] = values.imag
        return frame


def solve(system: "BlockSystem", *, refine: bool = True) -> HarmonicCoefficients:
    """LU with partial pivoting; one refinement pass if the residual bound is missed."""

    matrix, rhs = system.matrix, system.rhs
    if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != rhs.shape[0]:
        raise ValueError(f"Incompatible system shapes {matrix.shape} and {rhs.shape}.")

    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            factor = linalg.lu_factor(matrix, check_finite=True)
        except (linalg.LinAlgWarning, linalg.LinAlgError, ValueError) as exc:
            raise SingularSystemError(f"LU factorisation failed: {exc}") from exc

    solution = linalg.lu_solve(factor, rhs)
    rhs_norm = np.linalg.norm(rhs)
    residual = _relative_residual(matrix, solution, rhs, rhs_norm)
    if refine and residual >= RESIDUAL_TOLERANCE:
        logger.warning("Residual %.3e above %.0e; applying one refinement pass", residual, RESIDUAL_TOLERANCE)
        solution = solution + linalg.lu_solve(factor, rhs - matrix @ solution)
        residual = _relative_residual(matrix, solution, rhs, rhs_norm)

    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("Solution contains non-finite entries.")

    elapsed = time.perf_counter() - start
    logger.info("Solved %d unknowns in %.2fs (relative residual %.2e)", rhs.size, elapsed, residual)
    coeffs = HarmonicCoefficients.from_vector(solution, system.n, system.surface)
    return replace(coeffs, solve_seconds=elapsed)


def _relative_residual(matrix, solution, rhs, rhs_norm) -> float:
    if rhs_norm == 0.0:
        return float(np.linalg.norm(matrix @ solution))
    return float(np.linalg.norm(matrix @ solution - rhs) / rhs_norm)


def _pole_sphere_field(coeffs: HarmonicCoefficients, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """sum W_{ljk} Z^{(k)}_{l,j} on the unit sphere at sin(theta) = 0."""

    xhat = unit_sphere_point(theta, phi)
    field = np.zeros(theta.shape + (3,), dtype=complex)
    # Only |j| = 1 survives at the poles.
    for l in range(1, coeffs.n + 1):
        for j in (-1, 1):
            first = grad_sph_harm(l, j, theta, phi) / np.sqrt(l * (l + 1.0))
            second = np.cross(xhat, first)
            w1, w2 = coeffs.tangential[:, l, j + coeffs.n]
            field += w1 * first + w2 * second
    return field


def evaluate_density(coeffs: HarmonicCoefficients, theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """g1 = sum w_{lj} Y_{l,j} and g2 = sum W_{ljk} Z^{(k)}_{l,j} at the given angles.

    Poles are allowed; there the tangential part uses the limits of Grad Y.
    """

    if coeffs.surface is None:
        raise ValueError("Coefficients carry no surface; the tangential density needs F(x_hat).")
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    n = coeffs.n
    g1 = synthesize_scalar(coeffs.scalar, theta, phi)

    if n == 0:
        return g1, np.zeros(theta.shape + (3,), dtype=complex)

    at_pole = np.abs(np.sin(theta)) < POLE_TOLERANCE
    table = harmonic_table(n, np.where(at_pole, 0.5 * np.pi, theta))
    phase = np.exp(1j * np.arange(-n, n + 1) * phi[..., None])
    components = np.einsum("klj,kdlj...,...j->...d", coeffs.tangential, table.alpha, phase)
    sphere_field = np.einsum("...d,...di->...i", components, tangent_basis(theta, phi))
    if np.any(at_pole):
        sphere_field[at_pole] = _pole_sphere_field(coeffs, theta[at_pole], phi[at_pole])
    g2 = np.einsum("...ij,...j->...i", tangent_transport(coeffs.surface, theta, phi), sphere_field)
    return g1, g2


__all__ = [
    "RESIDUAL_TOLERANCE",
    "SingularSystemError",
    "HarmonicLayout",
    "harmonic_layout",
    "HarmonicCoefficients",
    "solve",
    "evaluate_density",
]
