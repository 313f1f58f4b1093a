"""Tests for pole rotations and the tangent transport."""

import numpy as np
import pytest

from elastic_scattering.utils.geometry import (
    MapDerivatives,
    ParametrizedSurface,
    SurfaceKind,
    bean,
    cushion,
    ellipsoid,
    sphere,
    sphere_derivatives,
    unit_sphere_point,
)
from elastic_scattering.utils.quadrature import build_rule
from elastic_scattering.utils.rotation import (
    FrameSingularError,
    rotated_grid,
    rotated_latitude,
    rotation_to_pole,
    tangent_transport,
    tangent_transport_derivatives,
    transported_frame,
)

SHAPES = [sphere, ellipsoid, cushion, bean]
ANGLES = (np.array([0.3, 1.2, 1.9, 2.8]), np.array([0.0, 1.7, 3.6, 5.9]))


def test_rotation_moves_point_to_north_pole():
    """T(theta, phi) p(theta, phi) = (0, 0, 1)."""

    theta, phi = ANGLES
    rotation = rotation_to_pole(theta, phi)

    moved = np.einsum("kij,kj->ki", rotation, unit_sphere_point(theta, phi))

    np.testing.assert_allclose(moved, np.tile([0.0, 0.0, 1.0], (4, 1)), atol=1e-15)


def test_rotation_is_orthogonal_and_proper():
    """T^T T = I and det T = 1."""

    theta, phi = ANGLES
    rotation = rotation_to_pole(theta, phi)

    np.testing.assert_allclose(rotation @ np.swapaxes(rotation, -1, -2), np.broadcast_to(np.eye(3), (4, 3, 3)), atol=1e-13)
    np.testing.assert_allclose(np.linalg.det(rotation), 1.0, atol=1e-13)


def test_rotation_is_an_isometry():
    """|T x - T y| = |x - y| for random pairs."""

    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((2, 20, 3))
    rotation = rotation_to_pole(1.1, 4.2)

    np.testing.assert_allclose(
        np.linalg.norm(x @ rotation.T - y @ rotation.T, axis=-1), np.linalg.norm(x - y, axis=-1), rtol=1e-13
    )


def test_rotated_latitude_centres_inner_grid_on_outer_node():
    """T^-1 sends the north pole to the outer node and the rotated nodes stay on the sphere."""

    outer, inner = build_rule(4), build_rule(7)
    frame = rotated_latitude(outer, inner, 2)

    pole_image = np.einsum("rij,j->ri", frame.inverse, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(pole_image, unit_sphere_point(outer.theta[2], outer.phi), atol=1e-14)
    assert frame.points.shape == (outer.n_phi, inner.n_phi, inner.n_theta, 3)
    np.testing.assert_allclose(np.linalg.norm(frame.points, axis=-1), 1.0, atol=1e-14)
    np.testing.assert_allclose(unit_sphere_point(frame.rotated_theta, frame.rotated_phi), frame.points, atol=1e-13)


def test_rotated_grid_has_one_frame_per_latitude():
    """rotated_grid returns the frames in latitude order."""

    outer, inner = build_rule(3), build_rule(5)

    frames = rotated_grid(outer, inner)

    assert [f.latitude for f in frames] == list(range(outer.n_theta))


@pytest.mark.parametrize("factory", SHAPES)
def test_transport_is_rotation_onto_normal(factory):
    """F is orthogonal and F x_hat = nu on every shape."""

    surface = factory()
    theta, phi = np.meshgrid(np.linspace(0.05, np.pi - 0.05, 15), np.linspace(0.0, 2 * np.pi, 24, endpoint=False))
    matrix = tangent_transport(surface, theta, phi)

    identity = np.broadcast_to(np.eye(3), matrix.shape)
    np.testing.assert_allclose(matrix @ np.swapaxes(matrix, -1, -2), identity, atol=1e-12)
    np.testing.assert_allclose(
        np.einsum("...ij,...j->...i", matrix, unit_sphere_point(theta, phi)), surface.normal(theta, phi), atol=1e-12
    )


def test_transport_is_identity_on_sphere():
    """On the unit sphere nu = x_hat and F = I."""

    theta, phi = ANGLES

    np.testing.assert_allclose(tangent_transport(sphere(), theta, phi), np.broadcast_to(np.eye(3), (4, 3, 3)), atol=1e-15)


@pytest.mark.parametrize("factory", [ellipsoid, cushion, bean])
def test_transported_frame_is_orthonormal_tangent_pair(factory):
    """F e_theta and F e_phi are orthonormal and tangent to the surface."""

    surface = factory()
    theta, phi = ANGLES
    first, second = transported_frame(surface, theta, phi)
    normal = surface.normal(theta, phi)

    np.testing.assert_allclose(np.linalg.norm(first, axis=-1), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(second, axis=-1), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(first * second, axis=-1), 0.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(first * normal, axis=-1), 0.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(second * normal, axis=-1), 0.0, atol=1e-13)


@pytest.mark.parametrize("factory", [ellipsoid, cushion, bean])
def test_transport_derivatives_match_finite_differences(factory):
    """dF/dtheta and dF/dphi agree with central differences."""

    surface = factory()
    theta, phi = ANGLES
    h = 1e-6
    derivatives = tangent_transport_derivatives(surface, theta, phi)

    fd_t = (tangent_transport(surface, theta + h, phi) - tangent_transport(surface, theta - h, phi)) / (2 * h)
    fd_p = (tangent_transport(surface, theta, phi + h) - tangent_transport(surface, theta, phi - h)) / (2 * h)

    np.testing.assert_allclose(derivatives.matrix, tangent_transport(surface, theta, phi), atol=1e-14)
    np.testing.assert_allclose(derivatives.matrix_t, fd_t, atol=1e-7)
    np.testing.assert_allclose(derivatives.matrix_p, fd_p, atol=1e-7)


def test_antiparallel_normal_is_refused():
    """A mirrored sphere has nu = -x_hat at phi = 0, where F is undefined."""

    def mirrored(theta, phi):
        d = sphere_derivatives(theta, -np.asarray(phi))
        return MapDerivatives(q=d.q, q_t=d.q_t, q_p=-d.q_p, q_tt=d.q_tt, q_tp=-d.q_tp, q_pp=d.q_pp)

    surface = ParametrizedSurface(SurfaceKind.CUSTOM, mirrored, "mirrored")

    with pytest.raises(FrameSingularError):
        tangent_transport(surface, np.pi / 2, 0.0)
