"""Incident waves, the Kupradze tensor and far-field patterns."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple, Union

import numpy as np
import pandas as pd

from .geometry import ParametrizedSurface, surface_frame
from .kernels import CoincidentPointsError, ElasticMedium, fundamental_solution, wavenumbers
from .quadrature import build_rule
from .solver import HarmonicCoefficients, evaluate_density

logger = logging.getLogger(__name__)

SOURCE_CLEARANCE = 1e-10
UNIT_TOLERANCE = 1e-12

DEFAULT_DIRECTION = (0.0, 0.0, 1.0)
DEFAULT_POLARIZATION = (1.0, 0.0, 0.0)
DEFAULT_SOURCE = (0.0, 0.05, 0.0866)


class SourceOnBoundaryError(ValueError):
    """Raised when a point source sits on (or numerically at) the boundary."""


class GridMismatchError(ValueError):
    """Raised when far fields sampled on different grids are compared."""


class IncidenceKind(str, Enum):
    POINT_SOURCE = "point-source"
    PLANE_ELASTIC = "plane"
    PLANE_P = "plane-p"
    PLANE_S = "plane-s"


def _vector(value) -> np.ndarray:
    out = np.asarray(value, dtype=float).reshape(3)
    return out


@dataclass(frozen=True)
class IncidentField:
    """Incident displacement field in the exterior medium.

    ``amplitude`` scales every kind; an amplitude of zero gives the trivial
    field.  For the point source the incident field is ``-G(x, y0) p`` so the
    scattered field outside the obstacle is ``G(x, y0) p``.
    """

    kind: IncidenceKind
    medium: ElasticMedium
    direction: Tuple[float, float, float] = DEFAULT_DIRECTION
    polarization: Tuple[float, float, float] = DEFAULT_POLARIZATION
    source: Tuple[float, float, float] = DEFAULT_SOURCE
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", IncidenceKind(self.kind))
        d = _vector(self.direction)
        p = _vector(self.polarization)
        if self.kind is not IncidenceKind.POINT_SOURCE and abs(np.linalg.norm(d) - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"Propagation direction must be a unit vector, got {tuple(d)}.")
        if self.kind is IncidenceKind.PLANE_S and abs(float(p @ d)) > 1e-12:
            raise ValueError("Shear plane waves need a polarization orthogonal to the direction.")

    def evaluate(self, x) -> np.ndarray:
        """u^i(x), shape (..., 3)."""

        x = np.asarray(x, dtype=float)
        kappa_p, kappa_s = wavenumbers(self.medium)
        d = _vector(self.direction)
        p = _vector(self.polarization)
        lam, mu = self.medium.lam, self.medium.mu

        if self.kind is IncidenceKind.POINT_SOURCE:
            u = -np.einsum("...ij,j->...i", green_tensor(x, _vector(self.source), self.medium), p)
        else:
            xd = x @ d
            wave_p = np.exp(1j * kappa_p * xd)[..., None]
            wave_s = np.exp(1j * kappa_s * xd)[..., None]
            if self.kind is IncidenceKind.PLANE_P:
                u = wave_p * d
            elif self.kind is IncidenceKind.PLANE_S:
                u = wave_s * p
            else:
                shear = np.cross(np.cross(d, p), d)
                u = wave_s * shear / mu + wave_p * (d @ p) * d / (lam + 2.0 * mu)
        return self.amplitude * u


def incident_trace(incident: IncidentField, surface: ParametrizedSurface, theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """f1 = -nu . u^i and f2 = -nu x u^i at q(theta, phi)."""

    frame = surface_frame(surface, theta, phi)
    if incident.kind is IncidenceKind.POINT_SOURCE:
        gap = np.linalg.norm(frame.point - _vector(incident.source), axis=-1)
        if np.any(gap < SOURCE_CLEARANCE):
            raise SourceOnBoundaryError(
                f"Point source {incident.source} lies on the boundary (distance {gap.min():.2e})."
            )
    u = incident.evaluate(frame.point)
    nu = frame.normal
    return -np.sum(nu * u, axis=-1), -np.cross(nu, u)


def _hessian(diff: np.ndarray, r: np.ndarray, kappa: float) -> np.ndarray:
    """grad_x grad_x^T Phi(x, y; kappa) in closed form."""

    phi = np.exp(1j * kappa * r) / (4.0 * np.pi * r)
    a = 1j * kappa - 1.0 / r
    first = phi * a
    second = phi * (a * a + 1.0 / r ** 2)
    rhat = diff / r[..., None]
    radial = rhat[..., :, None] * rhat[..., None, :]
    return second[..., None, None] * radial + (first / r)[..., None, None] * (np.eye(3) - radial)


def green_tensor(x, y, medium: ElasticMedium) -> np.ndarray:
    """G(x, y) = (1/mu) (Phi_s I + (1/kappa_s^2) grad grad^T (Phi_s - Phi_p))."""

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise CoincidentPointsError("The Green tensor is singular at x = y.")
    kappa_p, kappa_s = wavenumbers(medium)
    phi_s = fundamental_solution(x, y, kappa_s)
    hess = _hessian(diff, r, kappa_s) - _hessian(diff, r, kappa_p)
    return (phi_s[..., None, None] * np.eye(3) + hess / kappa_s ** 2) / medium.mu


# ---------------------------------------------------------------------------
# Far fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservationGrid:
    """Equally spaced theta in (0, pi) times equally spaced phi in [0, 2 pi)."""

    n_theta: int = 26
    n_phi: int = 50

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * np.pi / self.n_theta

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    def angles(self) -> Tuple[np.ndarray, np.ndarray]:
        theta, phi = np.meshgrid(self.theta, self.phi, indexing="ij")
        return theta.ravel(), phi.ravel()

    def directions(self) -> np.ndarray:
        theta, phi = self.angles()
        st = np.sin(theta)
        return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)

    @classmethod
    def parse(cls, text: str) -> "ObservationGrid":
        """Parse ``"26x50"``."""

        try:
            n_theta, n_phi = (int(part) for part in text.lower().split("x"))
        except ValueError as exc:
            raise ValueError(f"Observation grid must look like '26x50', got {text!r}.") from exc
        if n_theta < 1 or n_phi < 1:
            raise ValueError(f"Observation grid sizes must be positive, got {text!r}.")
        return cls(n_theta, n_phi)


@dataclass(frozen=True)
class FarField:
    """Compressional and shear far-field patterns at a list of directions."""

    theta: np.ndarray
    phi: np.ndarray
    v_p: np.ndarray = field(repr=False)
    v_s: np.ndarray = field(repr=False)

    @property
    def directions(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=-1)

    @property
    def total(self) -> np.ndarray:
        return self.v_p + self.v_s

    def to_frame(self) -> pd.DataFrame:
        columns = {"theta": self.theta, "phi": self.phi}
        for name, values in (("vp", self.v_p), ("vs", self.v_s)):
            for c, axis in enumerate("xyz"):
                columns[f"re_{name}_{axis}"] = values[:, c].real
                columns[f"im_{name}_{axis}"] = values[:, c].imag
        return pd.DataFrame(columns)


Directions = Union[ObservationGrid, np.ndarray]


def _angles_of(directions: Directions) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(directions, ObservationGrid):
        theta, phi = directions.angles()
        return theta, phi, directions.directions()
    xhat = np.atleast_2d(np.asarray(directions, dtype=float))
    xhat = xhat / np.linalg.norm(xhat, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(xhat[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(xhat[:, 1], xhat[:, 0]), 2.0 * np.pi)
    return theta, phi, xhat


def farfield_from_densities(
    coeffs: HarmonicCoefficients,
    surface: ParametrizedSurface,
    medium: ElasticMedium,
    directions: Directions,
) -> FarField:
    """v_p = i kappa_p phi_inf x_hat and v_s = i kappa_s x_hat x psi_inf by the order n+1 rule."""

    theta, phi, xhat = _angles_of(directions)
    kappa_p, kappa_s = wavenumbers(medium)

    rule = build_rule(coeffs.n + 1)
    node_theta, node_phi = rule.grid()
    frame = surface_frame(surface, node_theta, node_phi)
    g1, g2 = evaluate_density(coeffs, node_theta, node_phi)
    weights = (rule.weights() * frame.jacobian).ravel()
    points = frame.point.reshape(-1, 3)

    projection = xhat @ points.T
    phase_p = np.exp(-1j * kappa_p * projection) * weights
    phase_s = np.exp(-1j * kappa_s * projection) * weights

    phi_inf = phase_p @ g1.ravel() / (4.0 * np.pi)
    shear = phase_s @ g2.reshape(-1, 3)
    v_p = 1j * kappa_p * phi_inf[:, None] * xhat
    v_s = 1j * kappa_s * np.cross(xhat, shear) / (4.0 * np.pi)
    return FarField(theta=theta, phi=phi, v_p=v_p, v_s=v_s)


def exact_pointsource_farfield(xhat, medium: ElasticMedium, source, polarization) -> np.ndarray:
    """Far field of x -> G(x, y0) p: total of the shear and compressional parts."""

    v_p, v_s = _pointsource_parts(np.asarray(xhat, dtype=float), medium, _vector(source), _vector(polarization))
    return v_p + v_s


def _pointsource_parts(xhat: np.ndarray, medium: ElasticMedium, source: np.ndarray, p: np.ndarray):
    kappa_p, kappa_s = wavenumbers(medium)
    xy = xhat @ source
    along = (xhat @ p)[..., None] * xhat
    v_s = np.exp(-1j * kappa_s * xy)[..., None] / (4.0 * np.pi * medium.mu) * np.cross(np.cross(xhat, p), xhat)
    v_p = np.exp(-1j * kappa_p * xy)[..., None] / (4.0 * np.pi * (medium.lam + 2.0 * medium.mu)) * along
    return v_p, v_s


def pointsource_reference(incident: IncidentField, directions: Directions) -> FarField:
    """Exact far field of the scattered wave for point-source incidence."""

    if incident.kind is not IncidenceKind.POINT_SOURCE:
        raise ValueError("An exact far field is only available for point-source incidence.")
    theta, phi, xhat = _angles_of(directions)
    v_p, v_s = _pointsource_parts(xhat, incident.medium, _vector(incident.source), _vector(incident.polarization))
    return FarField(theta=theta, phi=phi, v_p=incident.amplitude * v_p, v_s=incident.amplitude * v_s)


def error_norms(computed: FarField, reference: FarField) -> float:
    """max over directions of |v_total - v_total_ref|."""

    if computed.theta.shape != reference.theta.shape or not (
        np.allclose(computed.theta, reference.theta) and np.allclose(computed.phi, reference.phi)
    ):
        raise GridMismatchError("Far fields were sampled on different observation grids.")
    difference = computed.total - reference.total
    return float(np.max(np.linalg.norm(difference, axis=-1)))


def structure_defect(farfield: FarField) -> Tuple[float, float]:
    """(max |x_hat x v_p|, max |x_hat . v_s|); both vanish for an exact far field."""

    xhat = farfield.directions
    radial = np.linalg.norm(np.cross(xhat, farfield.v_p), axis=-1)
    tangential = np.abs(np.sum(xhat * farfield.v_s, axis=-1))
    return float(radial.max(initial=0.0)), float(tangential.max(initial=0.0))


def forward_amplitude(farfield: FarField, polarization) -> complex:
    """v_inf(d) . p for a far field sampled at the single direction d."""

    return complex(farfield.total[0] @ _vector(polarization))


__all__ = [
    "SourceOnBoundaryError",
    "GridMismatchError",
    "IncidenceKind",
    "IncidentField",
    "incident_trace",
    "green_tensor",
    "ObservationGrid",
    "FarField",
    "farfield_from_densities",
    "exact_pointsource_farfield",
    "pointsource_reference",
    "error_norms",
    "structure_defect",
    "forward_amplitude",
]
