"""Tests for the surface parametrisations and their frames."""

import numpy as np
import pytest

from elastic_scattering.utils.geometry import (
    MapDerivatives,
    PoleEvaluationError,
    available_surfaces,
    bean,
    cartesian_to_angles,
    cushion,
    dsq_matrix,
    e_phi,
    e_theta,
    ellipsoid,
    get_surface,
    normal_derivatives,
    register_surface,
    sphere,
    sphere_derivatives,
    surface_frame,
    unit_sphere_point,
)
from elastic_scattering.utils.quadrature import surface_area

SHAPES = [sphere, ellipsoid, cushion, bean]


def _interior_grid(n_theta=100, n_phi=200):
    theta = np.linspace(0.0, np.pi, n_theta + 2)[1:-1]
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    return np.meshgrid(theta, phi)


def test_ellipsoid_frame_at_equator():
    """Tangents, Jacobian and normal of the ellipsoid at (pi/2, 0) match the closed form."""

    frame = surface_frame(ellipsoid(), np.pi / 2, 0.0)

    np.testing.assert_allclose(frame.point, [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(frame.t1, [0.0, 0.0, -0.5], atol=1e-15)
    np.testing.assert_allclose(frame.t2, [0.0, 0.75, 0.0], atol=1e-15)
    assert frame.jacobian == pytest.approx(0.375, abs=1e-15)
    np.testing.assert_allclose(frame.normal, [1.0, 0.0, 0.0], atol=1e-15)


def test_sphere_frame_is_spherical_basis():
    """On the unit sphere t1 = e_theta, t2 = e_phi, J = 1 and nu = p."""

    theta, phi = _interior_grid(17, 31)
    frame = surface_frame(sphere(), theta, phi)

    np.testing.assert_allclose(frame.t1, e_theta(theta, phi), atol=1e-14)
    np.testing.assert_allclose(frame.t2, e_phi(theta, phi), atol=1e-14)
    np.testing.assert_allclose(frame.jacobian, 1.0, atol=1e-14)
    np.testing.assert_allclose(frame.normal, unit_sphere_point(theta, phi), atol=1e-14)


@pytest.mark.parametrize("factory", SHAPES)
def test_jacobian_is_positive_on_scan_grid(factory):
    """J_q stays positive on a 100 x 200 interior grid for every built-in shape."""

    theta, phi = _interior_grid()
    jacobian = surface_frame(factory(), theta, phi).jacobian

    assert np.all(jacobian > 0.0)


@pytest.mark.parametrize("factory", SHAPES)
def test_normal_is_unit_and_orthogonal_to_tangents(factory):
    """nu has unit length and is orthogonal to t1 and t2."""

    theta, phi = _interior_grid(23, 41)
    frame = surface_frame(factory(), theta, phi)

    np.testing.assert_allclose(np.linalg.norm(frame.normal, axis=-1), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(frame.normal * frame.t1, axis=-1), 0.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(frame.normal * frame.t2, axis=-1), 0.0, atol=1e-13)


@pytest.mark.parametrize("factory", [sphere, ellipsoid, cushion])
def test_normal_points_outward_for_star_shapes(factory):
    """nu . q > 0 for shapes that are star-shaped about the origin."""

    theta, phi = _interior_grid(21, 40)
    frame = surface_frame(factory(), theta, phi)

    assert np.all(np.sum(frame.normal * frame.point, axis=-1) > 0.0)


def test_bean_normal_points_away_from_slice_centre():
    """On each slice x3 = cos theta the bean normal points away from the ellipse centre."""

    theta, phi = _interior_grid(21, 40)
    frame = surface_frame(bean(), theta, phi)
    centre = np.zeros_like(frame.point)
    centre[..., 1] = -0.3 * np.cos(np.pi * np.cos(theta))
    centre[..., 2] = np.cos(theta)

    assert np.all(np.sum(frame.normal * (frame.point - centre), axis=-1) > 0.0)


@pytest.mark.parametrize("factory", SHAPES)
def test_analytic_derivatives_match_finite_differences(factory):
    """First and second partials of q agree with central differences."""

    surface = factory()
    theta, phi = np.array([0.4, 1.1, 2.3]), np.array([0.3, 2.0, 4.5])
    h = 1e-5
    d = surface.derivatives(theta, phi)

    def q(t, p):
        return surface.derivatives(t, p).q

    def q_t(t, p):
        return surface.derivatives(t, p).q_t

    def q_p(t, p):
        return surface.derivatives(t, p).q_p

    np.testing.assert_allclose(d.q_t, (q(theta + h, phi) - q(theta - h, phi)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(d.q_p, (q(theta, phi + h) - q(theta, phi - h)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(d.q_tt, (q_t(theta + h, phi) - q_t(theta - h, phi)) / (2 * h), atol=1e-7)
    np.testing.assert_allclose(d.q_tp, (q_t(theta, phi + h) - q_t(theta, phi - h)) / (2 * h), atol=1e-7)
    np.testing.assert_allclose(d.q_pp, (q_p(theta, phi + h) - q_p(theta, phi - h)) / (2 * h), atol=1e-7)


@pytest.mark.parametrize("factory", SHAPES)
def test_normal_derivatives_match_finite_differences(factory):
    """d nu / d theta and d nu / d phi agree with central differences of nu."""

    surface = factory()
    theta, phi = np.array([0.5, 1.3, 2.6]), np.array([0.1, 3.0, 5.2])
    h = 1e-5
    nd = normal_derivatives(surface, theta, phi)

    fd_t = (surface.normal(theta + h, phi) - surface.normal(theta - h, phi)) / (2 * h)
    fd_p = (surface.normal(theta, phi + h) - surface.normal(theta, phi - h)) / (2 * h)

    np.testing.assert_allclose(nd.normal_t, fd_t, atol=1e-7)
    np.testing.assert_allclose(nd.normal_p, fd_p, atol=1e-7)


def test_dsq_matrix_maps_sphere_tangents_to_surface_tangents():
    """[D q] e_theta = t1, [D q] e_phi = t2 and [D q] x_hat = 0."""

    theta, phi = np.array([0.7, 2.1]), np.array([1.0, 4.0])
    surface = cushion()
    dsq = dsq_matrix(surface, theta, phi)
    frame = surface_frame(surface, theta, phi)

    np.testing.assert_allclose(np.einsum("...ij,...j->...i", dsq, e_theta(theta, phi)), frame.t1, atol=1e-14)
    np.testing.assert_allclose(np.einsum("...ij,...j->...i", dsq, e_phi(theta, phi)), frame.t2, atol=1e-14)
    np.testing.assert_allclose(
        np.einsum("...ij,...j->...i", dsq, unit_sphere_point(theta, phi)), 0.0, atol=1e-14
    )


@pytest.mark.parametrize("factory", SHAPES)
@pytest.mark.parametrize("pole,offset", [(0.0, 1e-7), (np.pi, -1e-7)])
def test_frame_at_poles_is_the_limit_of_nearby_values(factory, pole, offset):
    """At sin(theta) = 0 the point, J_q and nu match the neighbouring latitude and ignore phi."""

    phi = np.array([0.0, 1.3, 4.0])
    at_pole = surface_frame(factory(), pole, phi)
    nearby = surface_frame(factory(), pole + offset, phi)

    np.testing.assert_allclose(at_pole.point, nearby.point, atol=1e-5)
    np.testing.assert_allclose(at_pole.jacobian, nearby.jacobian, atol=1e-5)
    np.testing.assert_allclose(at_pole.normal, nearby.normal, atol=1e-5)
    np.testing.assert_allclose(at_pole.normal, np.broadcast_to(at_pole.normal[0], (3, 3)), atol=1e-14)


def test_normal_derivatives_are_refused_at_poles():
    """d nu / d theta and d nu / d phi still raise at sin(theta) = 0."""

    with pytest.raises(PoleEvaluationError):
        normal_derivatives(ellipsoid(), 0.0, 0.3)


def test_angles_near_the_pole_keep_full_accuracy():
    """theta = 1e-9 survives the trip through Cartesian coordinates."""

    theta, phi = cartesian_to_angles(unit_sphere_point(1e-9, 0.7))

    assert theta == pytest.approx(1e-9, rel=1e-12)
    assert phi == pytest.approx(0.7, rel=1e-12)


def test_sphere_area_is_exact():
    """Q_n(J_q) = 4 pi on the unit sphere already for n = 1."""

    assert surface_area(sphere(), 1) == pytest.approx(4.0 * np.pi, rel=1e-14)


@pytest.mark.parametrize("name", ["ellipsoid", "cushion", "bean"])
def test_surface_area_is_grid_converged(name):
    """The area of each shape is stable to 1e-10 between orders 60 and 80."""

    surface = get_surface(name)

    assert surface_area(surface, 60) == pytest.approx(surface_area(surface, 80), rel=1e-10)


def test_cartesian_round_trip_of_angles():
    """cartesian_to_angles inverts unit_sphere_point with phi in [0, 2 pi)."""

    theta, phi = np.array([0.2, 1.5, 3.0]), np.array([0.0, 3.5, 6.1])

    got_theta, got_phi = cartesian_to_angles(unit_sphere_point(theta, phi))

    np.testing.assert_allclose(got_theta, theta, atol=1e-14)
    np.testing.assert_allclose(got_phi, phi, atol=1e-14)


def test_registry_knows_builtin_shapes_and_rejects_unknown():
    """get_surface resolves the built-in names case-insensitively."""

    assert {"sphere", "ellipsoid", "cushion", "bean"} <= set(available_surfaces())
    assert get_surface("Bean").name == "bean"
    with pytest.raises(ValueError, match="Unknown geometry"):
        get_surface("torus")


def test_register_custom_surface():
    """A scaled sphere can be registered and is selectable by name."""

    def doubled(theta, phi):
        return MapDerivatives(*(2.0 * c for c in sphere_derivatives(theta, phi)))

    surface = register_surface("doubled_sphere", doubled)

    assert "doubled_sphere" in available_surfaces()
    assert get_surface("doubled_sphere") is surface
    assert surface.jacobian(np.pi / 3, 0.2) == pytest.approx(4.0)


def test_register_rejects_degenerate_map():
    """A map with a vanishing Jacobian is refused."""

    def flat(theta, phi):
        base = sphere_derivatives(theta, phi)
        squash = np.array([1.0, 0.0, 1.0])
        return MapDerivatives(*(c * squash for c in base))

    with pytest.raises(ValueError, match="vanishing Jacobian"):
        register_surface("flat", flat)
