"""Tests for spherical harmonics, tangential basis fields and Wigner coefficients."""

from math import factorial

import numpy as np
import pytest

from elastic_scattering.utils.geometry import (
    bean,
    cartesian_to_angles,
    e_phi,
    e_theta,
    sphere,
    unit_sphere_point,
)
from elastic_scattering.utils.quadrature import build_rule
from elastic_scattering.utils.rotation import rotation_to_pole
from elastic_scattering.utils.sphharm import (
    alpha_coeff,
    assoc_legendre,
    f_coeff,
    f_matrix,
    grad_sph_harm,
    harmonic_table,
    normalized_legendre,
    sph_harm,
    wigner_d,
    wigner_table,
    z_basis,
    z_basis_derivatives,
)


def _wigner_closed_form(l, j, m, beta):
    """Sum formula with factorials for d^l_{jm}(beta)."""

    total = 0.0
    for s in range(0, 2 * l + 1):
        denominators = (l + m - s, s, j - m + s, l - j - s)
        if min(denominators) < 0:
            continue
        numerator = np.sqrt(
            float(factorial(l + j) * factorial(l - j) * factorial(l + m) * factorial(l - m))
        )
        denominator = np.prod([float(factorial(k)) for k in denominators])
        total += (
            (-1.0) ** (j - m + s)
            * numerator
            / denominator
            * np.cos(beta / 2) ** (2 * l + m - j - 2 * s)
            * np.sin(beta / 2) ** (j - m + 2 * s)
        )
    return total


def test_assoc_legendre_has_no_condon_shortley_phase():
    """P_2^1(x) = 3 x sqrt(1 - x^2) and P_3^3(x) = 15 (1 - x^2)^(3/2)."""

    x = np.array([-0.7, 0.1, 0.9])

    np.testing.assert_allclose(assoc_legendre(2, 1, x), 3 * x * np.sqrt(1 - x ** 2), rtol=1e-13)
    np.testing.assert_allclose(assoc_legendre(3, 3, x), 15 * (1 - x ** 2) ** 1.5, rtol=1e-13)
    with pytest.raises(ValueError):
        assoc_legendre(2, 3, x)


def test_normalized_legendre_agrees_with_scipy_values():
    """The recurrence reproduces sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m."""

    theta = np.array([0.3, 1.2, 2.5])
    table = normalized_legendre(8, theta)

    for l in range(9):
        for m in range(l + 1):
            norm = np.sqrt((2 * l + 1) / (4 * np.pi) * factorial(l - m) / factorial(l + m))
            np.testing.assert_allclose(table[l, m], norm * assoc_legendre(l, m, np.cos(theta)), rtol=1e-11, atol=1e-14)


def test_low_degree_harmonics_match_closed_forms():
    """Y_{1,0}, Y_{1,+-1} and Y_{2,2} in the Condon-Shortley convention."""

    theta, phi = np.array([0.4, 1.9]), np.array([0.8, 5.0])
    st, ct = np.sin(theta), np.cos(theta)

    np.testing.assert_allclose(sph_harm(1, 0, theta, phi), np.sqrt(3 / (4 * np.pi)) * ct, rtol=1e-14)
    np.testing.assert_allclose(
        sph_harm(1, 1, theta, phi), -np.sqrt(3 / (8 * np.pi)) * st * np.exp(1j * phi), rtol=1e-14
    )
    np.testing.assert_allclose(
        sph_harm(1, -1, theta, phi), np.sqrt(3 / (8 * np.pi)) * st * np.exp(-1j * phi), rtol=1e-14
    )
    np.testing.assert_allclose(
        sph_harm(2, 2, theta, phi), 0.25 * np.sqrt(15 / (2 * np.pi)) * st ** 2 * np.exp(2j * phi), rtol=1e-13
    )


def test_negative_orders_are_conjugate_symmetric():
    """Y_{l,-j} = (-1)^j conj(Y_{l,j})."""

    theta, phi = np.array([0.6, 2.2]), np.array([1.3, 3.9])

    for l in range(1, 6):
        for j in range(1, l + 1):
            np.testing.assert_allclose(
                sph_harm(l, -j, theta, phi), (-1) ** j * np.conj(sph_harm(l, j, theta, phi)), atol=1e-14
            )


def test_invalid_index_is_rejected():
    """|j| > l is refused."""

    with pytest.raises(ValueError):
        sph_harm(2, 3, 0.5, 0.5)
    with pytest.raises(ValueError):
        alpha_coeff(0, 0, 1, 1, 0.5)


def test_table_derivatives_match_finite_differences():
    """theta derivatives of c P_l^{|j|}(cos theta) agree with central differences."""

    theta = np.array([0.35, 1.4, 2.7])
    h = 1e-5
    table = harmonic_table(6, theta)
    plus, minus = harmonic_table(6, theta + h), harmonic_table(6, theta - h)

    np.testing.assert_allclose(table.theta_derivative, (plus.values - minus.values) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(
        table.second_derivative, (plus.theta_derivative - minus.theta_derivative) / (2 * h), atol=1e-7
    )
    np.testing.assert_allclose(table.alpha_derivative, (plus.alpha - minus.alpha) / (2 * h), atol=1e-7)


def test_gradient_matches_finite_differences():
    """Grad Y = dY/dtheta e_theta + (1/sin theta) dY/dphi e_phi."""

    theta, phi = np.array([0.5, 2.0]), np.array([0.7, 4.4])
    h = 1e-6
    l, j = 4, -3

    d_theta = (sph_harm(l, j, theta + h, phi) - sph_harm(l, j, theta - h, phi)) / (2 * h)
    d_phi = (sph_harm(l, j, theta, phi + h) - sph_harm(l, j, theta, phi - h)) / (2 * h)
    expected = d_theta[:, None] * e_theta(theta, phi) + (d_phi / np.sin(theta))[:, None] * e_phi(theta, phi)

    np.testing.assert_allclose(grad_sph_harm(l, j, theta, phi), expected, atol=1e-8)


@pytest.mark.parametrize("l", [1, 2, 5])
@pytest.mark.parametrize("j", [-1, 1])
@pytest.mark.parametrize("pole", [0.0, np.pi])
def test_gradient_at_pole_is_continuous_limit(l, j, pole):
    """The pole value of Grad Y_{l,+-1} is the limit of nearby regular values."""

    phi = np.array([0.3, 2.5])
    offset = 1e-7 if pole == 0.0 else -1e-7

    at_pole = grad_sph_harm(l, j, np.full(2, pole), phi)
    nearby = grad_sph_harm(l, j, np.full(2, pole + offset), phi)

    np.testing.assert_allclose(at_pole, nearby, atol=1e-5)


def test_gradient_vanishes_at_pole_for_other_orders():
    """Only |j| = 1 harmonics have a nonzero gradient at the poles."""

    assert np.all(grad_sph_harm(3, 0, 0.0, 1.0) == 0.0)
    assert np.all(grad_sph_harm(3, 2, np.pi, 1.0) == 0.0)


def test_alpha_defines_rotated_pair():
    """On the sphere Z^(2) = x_hat x Z^(1) and both have the expected norm relation."""

    theta, phi = np.array([0.4, 1.3, 2.9]), np.array([0.2, 3.3, 5.9])
    xhat = unit_sphere_point(theta, phi)

    for l in range(1, 5):
        for j in range(-l, l + 1):
            z1 = z_basis(sphere(), l, j, 1, theta, phi)
            z2 = z_basis(sphere(), l, j, 2, theta, phi)
            np.testing.assert_allclose(z2, np.cross(xhat, z1), atol=1e-13)
            np.testing.assert_allclose(z1, grad_sph_harm(l, j, theta, phi) / np.sqrt(l * (l + 1)), atol=1e-13)


def test_alpha_coeff_matches_table():
    """alpha_coeff reads the same entries as the vectorised table."""

    theta = np.array([0.8, 2.0])
    table = harmonic_table(4, theta)

    np.testing.assert_allclose(alpha_coeff(3, -2, 2, 1, theta), table.alpha[1, 0, 3, -2 + 4])


def test_tangential_fields_are_orthonormal_on_sphere():
    """(Z^(k)_{l,j}, Z^(k')_{l',j'}) on the unit sphere is the identity for l <= 3."""

    rule = build_rule(9)
    theta, phi = rule.grid()
    fields = [
        z_basis(sphere(), l, j, k, theta, phi)
        for k in (1, 2)
        for l in range(1, 4)
        for j in range(-l, l + 1)
    ]
    gram = np.array(
        [[rule.integrate(np.sum(a * np.conj(b), axis=-1)) for b in fields] for a in fields]
    )

    np.testing.assert_allclose(gram, np.eye(len(fields)), atol=1e-12)


def test_z_basis_is_tangent_to_bean():
    """F(x_hat) carries the sphere field into the tangent plane of the bean."""

    surface = bean()
    theta, phi = np.array([0.7, 1.6, 2.4]), np.array([0.9, 2.2, 5.5])
    normal = surface.normal(theta, phi)

    for k in (1, 2):
        field = z_basis(surface, 3, 2, k, theta, phi)
        np.testing.assert_allclose(np.sum(field * normal, axis=-1), 0.0, atol=1e-13)


def test_z_basis_derivatives_match_finite_differences():
    """Analytic theta and phi derivatives of Z on the bean agree with central differences."""

    surface = bean()
    theta, phi = np.array([0.6, 1.7]), np.array([1.1, 4.0])
    h = 1e-6

    for l, j, k in [(1, 0, 1), (3, -2, 2), (4, 3, 1)]:
        _, z_t, z_p = z_basis_derivatives(surface, l, j, k, theta, phi)
        fd_t = (z_basis(surface, l, j, k, theta + h, phi) - z_basis(surface, l, j, k, theta - h, phi)) / (2 * h)
        fd_p = (z_basis(surface, l, j, k, theta, phi + h) - z_basis(surface, l, j, k, theta, phi - h)) / (2 * h)
        np.testing.assert_allclose(z_t, fd_t, atol=1e-7)
        np.testing.assert_allclose(z_p, fd_p, atol=1e-7)


@pytest.mark.parametrize("beta", [0.5 * np.pi, 0.7, 2.9])
def test_wigner_d_matches_factorial_formula(beta):
    """The eigen-decomposition route reproduces the closed sum formula for l <= 6."""

    for l in range(7):
        d = wigner_d(l, beta)
        for j in range(-l, l + 1):
            for m in range(-l, l + 1):
                assert d[j + l, m + l] == pytest.approx(_wigner_closed_form(l, j, m, beta), abs=1e-12)


def test_wigner_d_at_half_pi_sample_value():
    """d^1_{1,0}(pi/2) = -1/2 times sqrt(2)."""

    assert wigner_table(1).value(1, 1, 0) == pytest.approx(-np.sqrt(0.5), abs=1e-14)


def test_wigner_table_rows_are_orthonormal():
    """Each d^(l)(pi/2) is orthogonal."""

    table = wigner_table(8)

    for l in range(9):
        d = table.matrix(l)
        np.testing.assert_allclose(d @ d.T, np.eye(2 * l + 1), atol=1e-12)


def test_f_coeff_matches_f_matrix():
    """The scalar and vectorised F coefficients agree."""

    table = wigner_table(5)
    matrix = f_matrix(table, 1.1)

    for l in range(6):
        for jt in range(-l, l + 1):
            for j in range(-l, l + 1):
                assert matrix[l, jt + 5, j + 5] == pytest.approx(f_coeff(table, l, jt, j, 1.1), abs=1e-13)


@pytest.mark.parametrize("theta_s,phi_r", [(0.4, 0.0), (1.3, 2.1), (2.8, 4.7)])
def test_rotated_harmonic_identity(theta_s, phi_r):
    """Y_{l,j}(T^-1 n) = sum_j~ F_{l j~ j}(theta) e^{i(j - j~) phi} Y_{l,j~}(n) for l <= 6."""

    lmax = 6
    table = wigner_table(lmax)
    coeffs = f_matrix(table, theta_s)
    inverse = rotation_to_pole(theta_s, phi_r).T

    n_theta, n_phi = np.array([0.3, 1.0, 1.9, 2.6]), np.array([0.5, 2.4, 3.7, 6.0])
    rotated = unit_sphere_point(n_theta, n_phi) @ inverse.T
    r_theta, r_phi = cartesian_to_angles(rotated)

    for l in range(lmax + 1):
        for j in range(-l, l + 1):
            lhs = sph_harm(l, j, r_theta, r_phi)
            rhs = sum(
                coeffs[l, jt + lmax, j + lmax] * np.exp(1j * (j - jt) * phi_r) * sph_harm(l, jt, n_theta, n_phi)
                for jt in range(-l, l + 1)
            )
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)
