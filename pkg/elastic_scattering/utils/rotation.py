"""Pole rotations of the inner grid and the tangent transport F(x_hat).

``T(theta, phi)`` rotates the point ``p(theta, phi)`` onto the north pole so
that the weakly singular point of a boundary integral sits where the inner
quadrature puts its singular weights.  ``F(x_hat)`` is the rotation taking
the sphere's radial direction onto the surface normal; it carries tangent
fields of the sphere onto tangent fields of the obstacle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Tuple

import numpy as np

from .geometry import (
    ParametrizedSurface,
    SurfaceFrame,
    cartesian_to_angles,
    e_phi,
    e_theta,
    normal_derivatives,
    surface_frame,
    unit_sphere_point,
)

if TYPE_CHECKING:  # pragma: no cover
    from .quadrature import SphericalQuadrature

logger = logging.getLogger(__name__)

FRAME_TOLERANCE = 1e-8


class FrameSingularError(RuntimeError):
    """Raised when the normal points (numerically) opposite to x_hat."""


def rotation_z(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(angle), np.ones_like(angle)
    return np.stack(
        [np.stack([c, -s, zero], -1), np.stack([s, c, zero], -1), np.stack([zero, zero, one], -1)],
        axis=-2,
    )


def rotation_y(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(angle), np.ones_like(angle)
    return np.stack(
        [np.stack([c, zero, s], -1), np.stack([zero, one, zero], -1), np.stack([-s, zero, c], -1)],
        axis=-2,
    )


def rotation_to_pole(theta, phi) -> np.ndarray:
    """T = R_z(phi) R_y(-theta) R_z(-phi); maps p(theta, phi) onto the north pole."""

    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    return rotation_z(phi) @ rotation_y(-theta) @ rotation_z(-phi)


@dataclass(frozen=True)
class RotationFrame:
    """Inner grid rotated about every outer node of one latitude.

    Arrays are indexed ``[r, r', s']``: outer longitude, inner longitude and
    inner latitude.
    """

    latitude: int
    theta: float
    phi: np.ndarray
    inverse: np.ndarray
    points: np.ndarray
    rotated_theta: np.ndarray
    rotated_phi: np.ndarray


def rotated_latitude(
    outer: "SphericalQuadrature", inner: "SphericalQuadrature", latitude: int
) -> RotationFrame:
    theta_s = float(outer.theta[latitude])
    inverse = np.swapaxes(rotation_to_pole(theta_s, outer.phi), -1, -2)
    nodes = unit_sphere_point(inner.theta[None, :], inner.phi[:, None])
    points = np.einsum("rij,abj->rabi", inverse, nodes)
    rotated_theta, rotated_phi = cartesian_to_angles(points)
    return RotationFrame(
        latitude=latitude,
        theta=theta_s,
        phi=outer.phi,
        inverse=inverse,
        points=points,
        rotated_theta=rotated_theta,
        rotated_phi=rotated_phi,
    )


def rotated_grid(outer: "SphericalQuadrature", inner: "SphericalQuadrature") -> List[RotationFrame]:
    """All rotated inner grids, one :class:`RotationFrame` per outer latitude."""

    return [rotated_latitude(outer, inner, s) for s in range(outer.n_theta)]


def _cross_matrix(w: np.ndarray) -> np.ndarray:
    zero = np.zeros(w.shape[:-1])
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    return np.stack(
        [np.stack([zero, -z, y], -1), np.stack([z, zero, -x], -1), np.stack([-y, x, zero], -1)],
        axis=-2,
    )


def _transport(cos_psi: np.ndarray, w: np.ndarray) -> np.ndarray:
    denom = 1.0 + cos_psi
    if np.any(denom < FRAME_TOLERANCE):
        raise FrameSingularError("The surface normal is antiparallel to x_hat; F(x_hat) is undefined.")
    outer = w[..., :, None] * w[..., None, :]
    return (
        cos_psi[..., None, None] * np.eye(3)
        + _cross_matrix(w)
        + outer / denom[..., None, None]
    )


def tangent_transport(surface: ParametrizedSurface, theta, phi, frame: SurfaceFrame | None = None) -> np.ndarray:
    """Rotation matrix F(x_hat) with F x_hat = nu(x)."""

    if frame is None:
        frame = surface_frame(surface, theta, phi)
    xhat = unit_sphere_point(theta, phi)
    nu = frame.normal
    return _transport(np.sum(xhat * nu, axis=-1), np.cross(xhat, nu))


@dataclass(frozen=True)
class TransportDerivatives:
    matrix: np.ndarray
    matrix_t: np.ndarray
    matrix_p: np.ndarray
    frame: SurfaceFrame


def tangent_transport_derivatives(surface: ParametrizedSurface, theta, phi) -> TransportDerivatives:
    """F(x_hat) together with its derivatives in theta and phi."""

    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    nd = normal_derivatives(surface, theta, phi)
    nu = nd.frame.normal
    xhat = unit_sphere_point(theta, phi)
    xhat_t = e_theta(theta, phi)
    xhat_p = np.sin(theta)[..., None] * e_phi(theta, phi)

    cos_psi = np.sum(xhat * nu, axis=-1)
    w = np.cross(xhat, nu)
    matrix = _transport(cos_psi, w)
    denom = (1.0 + cos_psi)[..., None, None]

    derivatives = []
    for dx, dnu in ((xhat_t, nd.normal_t), (xhat_p, nd.normal_p)):
        dcos = np.sum(dx * nu, axis=-1) + np.sum(xhat * dnu, axis=-1)
        dw = np.cross(dx, nu) + np.cross(xhat, dnu)
        dwwt = dw[..., :, None] * w[..., None, :] + w[..., :, None] * dw[..., None, :]
        wwt = w[..., :, None] * w[..., None, :]
        derivatives.append(
            dcos[..., None, None] * np.eye(3)
            + _cross_matrix(dw)
            + dwwt / denom
            - dcos[..., None, None] * wwt / denom ** 2
        )

    return TransportDerivatives(matrix, derivatives[0], derivatives[1], nd.frame)


def transported_frame(surface: ParametrizedSurface, theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """F(x_hat) e_theta and F(x_hat) e_phi, tangent to the surface at q(x_hat)."""

    matrix = tangent_transport(surface, theta, phi)
    return (
        np.einsum("...ij,...j->...i", matrix, e_theta(theta, phi)),
        np.einsum("...ij,...j->...i", matrix, e_phi(theta, phi)),
    )


__all__ = [
    "FRAME_TOLERANCE",
    "FrameSingularError",
    "rotation_z",
    "rotation_y",
    "rotation_to_pole",
    "RotationFrame",
    "rotated_latitude",
    "rotated_grid",
    "tangent_transport",
    "TransportDerivatives",
    "tangent_transport_derivatives",
    "transported_frame",
]
