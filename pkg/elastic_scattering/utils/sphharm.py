"""Spherical harmonics, their surface gradients and rotation coefficients.

Conventions
-----------
``Y_{l,j}(p(theta, phi)) = c_l^j P_l^{|j|}(cos theta) e^{i j phi}`` with the
associated Legendre functions taken *without* the Condon-Shortley phase and
``c_l^j = (-1)^{(j+|j|)/2} sqrt((2l+1)/(4 pi) (l-|j|)!/(l+|j|)!)``.  The
product ``c_l^j P_l^{|j|}`` is never formed from raw factorials; it is built
by the normalised three-term recurrence.

Tables over all degrees are stored as arrays indexed ``[l, j + lmax, ...]``
so that orders ``-lmax..lmax`` share one axis.  Entries with ``|j| > l`` are
zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.special import lpmv

from .geometry import PoleEvaluationError, POLE_TOLERANCE, ParametrizedSurface, e_phi, e_theta
from .rotation import tangent_transport, tangent_transport_derivatives

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Associated Legendre functions
# ---------------------------------------------------------------------------


def assoc_legendre(l: int, m: int, x) -> np.ndarray:
    """Unnormalised P_l^m(x) without the Condon-Shortley phase, 0 <= m <= l."""

    if not 0 <= m <= l:
        raise ValueError(f"Associated Legendre order must satisfy 0 <= m <= l, got l={l}, m={m}.")
    return (-1.0) ** m * lpmv(m, l, np.asarray(x, dtype=float))


def normalized_legendre(lmax: int, theta) -> np.ndarray:
    """|c_l^m| P_l^m(cos theta) for 0 <= m <= l <= lmax, shape (lmax+1, lmax+1, *theta.shape)."""

    theta = np.asarray(theta, dtype=float)
    x, y = np.cos(theta), np.sin(theta)
    table = np.zeros((lmax + 1, lmax + 1) + theta.shape)
    table[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)

    for m in range(1, lmax + 1):
        table[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * y * table[m - 1, m - 1]

    for m in range(lmax):
        table[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * table[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            table[l, m] = a * (x * table[l - 1, m] - b * table[l - 2, m])

    return table


def _order_sign(j: np.ndarray) -> np.ndarray:
    return np.where(j > 0, (-1.0) ** np.abs(j), 1.0)


@dataclass(frozen=True)
class HarmonicTable:
    """c_l^j P_l^{|j|}(cos theta), its theta derivatives and the alpha functions.

    ``values``/``theta_derivative``/``second_derivative`` are indexed
    ``[l, j + lmax, ...]``; ``alpha`` and ``alpha_derivative`` are indexed
    ``[k - 1, d - 1, l, j + lmax, ...]``.
    """

    lmax: int
    theta: np.ndarray
    values: np.ndarray
    theta_derivative: np.ndarray
    second_derivative: np.ndarray
    alpha: np.ndarray
    alpha_derivative: np.ndarray

    def orders(self) -> np.ndarray:
        return np.arange(-self.lmax, self.lmax + 1)


def harmonic_table(lmax: int, theta) -> HarmonicTable:
    """Build the Legendre-part tables needed by assembly at the latitudes ``theta``.

    The theta derivative uses
    ``dP_l^m/dtheta = -(l+1) cot(theta) P_l^m + sqrt((2l+1)(l+m+1)(l-m+1)/(2l+3)) P_{l+1}^m / sin(theta)``
    in normalised form, so the recurrence runs to degree ``lmax + 1``.
    """

    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    if np.any(np.abs(st) < POLE_TOLERANCE):
        raise PoleEvaluationError("Harmonic tables with derivatives need sin(theta) != 0.")
    ct = np.cos(theta)
    cot = ct / st

    full = normalized_legendre(lmax + 1, theta)
    base = full[: lmax + 1, : lmax + 1]
    l = np.arange(lmax + 1)[:, None]
    m = np.arange(lmax + 1)[None, :]
    coupling = np.sqrt(np.clip((2 * l + 1) * (l + m + 1) * (l - m + 1), 0, None) / (2 * l + 3.0))
    coupling = np.where(m <= l, coupling, 0.0)
    extra = (slice(None), slice(None)) + (None,) * theta.ndim
    derivative = -(l + 1)[extra] * cot * base + coupling[extra] * full[1:, : lmax + 1] / st
    eigen = (l * (l + 1))[extra] - (m ** 2)[extra] / st ** 2
    second = -cot * derivative - eigen * base

    orders = np.arange(-lmax, lmax + 1)
    absj = np.abs(orders)
    sign = _order_sign(orders)[(None, slice(None)) + (None,) * theta.ndim]
    values = sign * base[:, absj]
    theta_derivative = sign * derivative[:, absj]
    second_derivative = sign * second[:, absj]
    mask = (absj[None, :] <= np.arange(lmax + 1)[:, None])[extra]
    values = np.where(mask, values, 0.0)
    theta_derivative = np.where(mask, theta_derivative, 0.0)
    second_derivative = np.where(mask, second_derivative, 0.0)

    degree = np.arange(lmax + 1, dtype=float)
    scale = np.zeros_like(degree)
    scale[1:] = 1.0 / np.sqrt(degree[1:] * (degree[1:] + 1.0))
    scale = scale[(slice(None), None) + (None,) * theta.ndim]
    ij = (1j * orders)[(None, slice(None)) + (None,) * theta.ndim]

    a11 = scale * theta_derivative
    a12 = scale * ij * values / st
    d11 = scale * second_derivative
    d12 = scale * ij * (theta_derivative / st - ct * values / st ** 2)

    alpha = np.stack([np.stack([a11, a12]), np.stack([-a12, a11])]).astype(complex)
    alpha_derivative = np.stack([np.stack([d11, d12]), np.stack([-d12, d11])]).astype(complex)

    return HarmonicTable(
        lmax=lmax,
        theta=theta,
        values=values,
        theta_derivative=theta_derivative,
        second_derivative=second_derivative,
        alpha=alpha,
        alpha_derivative=alpha_derivative,
    )


# ---------------------------------------------------------------------------
# Harmonics and surface gradients
# ---------------------------------------------------------------------------


def _check_index(l: int, j: int) -> None:
    if l < 0 or abs(j) > l:
        raise ValueError(f"Invalid harmonic index (l={l}, j={j}); need |j| <= l.")


def sph_harm(l: int, j: int, theta, phi) -> np.ndarray:
    """Orthonormal Y_{l,j}(p(theta, phi))."""

    _check_index(l, j)
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    legendre = normalized_legendre(l, theta)[l, abs(j)]
    return _order_sign(np.asarray(j)) * legendre * np.exp(1j * j * phi)


def grad_sph_harm(l: int, j: int, theta, phi) -> np.ndarray:
    """Surface gradient of Y_{l,j}, a complex tangent vector of shape (..., 3).

    At sin(theta) = 0 the value is the continuous limit
    s_j sqrt((2l+1)/(4 pi)) sqrt(l(l+1)) e^{i j phi}
    ((cos theta)^l / 2 e_theta + i j (cos theta)^(l+1) / 2 e_phi) for |j| = 1,
    with s_j the order sign of Y_{l,j}, and zero otherwise.
    """

    _check_index(l, j)
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    et, ep = e_theta(theta, phi), e_phi(theta, phi)
    if l == 0:
        return np.zeros(theta.shape + (3,), dtype=complex)

    st = np.sin(theta)
    ct = np.cos(theta)
    at_pole = np.abs(st) < POLE_TOLERANCE
    safe_theta = np.where(at_pole, 0.5 * np.pi, theta)
    table = harmonic_table(l, safe_theta)
    idx = j + l
    phase = np.exp(1j * j * phi)
    dtheta = table.theta_derivative[l, idx] * phase
    dphi = 1j * j * table.values[l, idx] * phase / np.where(at_pole, 1.0, st)
    regular = dtheta[..., None] * et + dphi[..., None] * ep

    if abs(j) == 1:
        pole_scale = np.sqrt((2 * l + 1) / (4.0 * np.pi)) * np.sqrt(l * (l + 1.0))
        pole = (_order_sign(np.asarray(j)) * pole_scale * phase)[..., None] * (
            (0.5 * ct ** l)[..., None] * et + (0.5j * j * ct ** (l + 1))[..., None] * ep
        )
    else:
        pole = np.zeros_like(regular)
    return np.where(at_pole[..., None], pole, regular)


def alpha_coeff(l: int, j: int, k: int, d: int, theta) -> np.ndarray:
    """alpha^{(k,d)}_{l,j}(theta): component of Z^{(k)}_{l,j} along v^{(d)} (before F)."""

    _check_index(l, j)
    if l < 1:
        raise ValueError("alpha coefficients are defined for l >= 1.")
    if k not in (1, 2) or d not in (1, 2):
        raise ValueError(f"Tangential indices must be 1 or 2, got k={k}, d={d}.")
    table = harmonic_table(l, theta)
    return table.alpha[k - 1, d - 1, l, j + l]


def tangent_basis(theta, phi) -> np.ndarray:
    """v^{(1)} = e_theta and v^{(2)} = e_phi stacked on axis -2."""

    return np.stack([e_theta(theta, phi), e_phi(theta, phi)], axis=-2)


def tangent_basis_derivatives(theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    """Theta and phi derivatives of :func:`tangent_basis`."""

    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    zero = np.zeros_like(theta)
    p = np.stack([st * cp, st * sp, ct], axis=-1)
    d_theta = np.stack([-p, np.zeros_like(p)], axis=-2)
    d_phi = np.stack(
        [ct[..., None] * e_phi(theta, phi), np.stack([-cp, -sp, zero], axis=-1)], axis=-2
    )
    return d_theta, d_phi


def _sphere_field(l: int, j: int, k: int, theta, phi, derivatives: bool = False):
    table = harmonic_table(l, theta)
    idx = j + l
    phase = np.exp(1j * j * phi)
    alpha = table.alpha[k - 1, :, l, idx]
    basis = tangent_basis(theta, phi)
    field = phase[..., None] * np.einsum("d...,...di->...i", alpha, basis)
    if not derivatives:
        return field

    basis_t, basis_p = tangent_basis_derivatives(theta, phi)
    alpha_t = table.alpha_derivative[k - 1, :, l, idx]
    field_t = phase[..., None] * (
        np.einsum("d...,...di->...i", alpha_t, basis) + np.einsum("d...,...di->...i", alpha, basis_t)
    )
    field_p = 1j * j * field + phase[..., None] * np.einsum("d...,...di->...i", alpha, basis_p)
    return field, field_t, field_p


def z_basis(surface: ParametrizedSurface, l: int, j: int, k: int, theta, phi) -> np.ndarray:
    """Tangential basis field Z^{(k)}_{l,j} = F(x_hat) sum_d alpha^{(k,d)} e^{i j phi} v^{(d)}."""

    _check_index(l, j)
    if l < 1:
        raise ValueError("Z basis fields are defined for l >= 1.")
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    field = _sphere_field(l, j, k, theta, phi)
    transport = tangent_transport(surface, theta, phi)
    return np.einsum("...ij,...j->...i", transport, field)


def z_basis_derivatives(
    surface: ParametrizedSurface, l: int, j: int, k: int, theta, phi
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z^{(k)}_{l,j} together with its theta and phi derivatives."""

    _check_index(l, j)
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    field, field_t, field_p = _sphere_field(l, j, k, theta, phi, derivatives=True)
    transport = tangent_transport_derivatives(surface, theta, phi)
    apply = lambda matrix, vector: np.einsum("...ij,...j->...i", matrix, vector)  # noqa: E731
    return (
        apply(transport.matrix, field),
        apply(transport.matrix_t, field) + apply(transport.matrix, field_t),
        apply(transport.matrix_p, field) + apply(transport.matrix, field_p),
    )


# ---------------------------------------------------------------------------
# Wigner rotation coefficients
# ---------------------------------------------------------------------------


def _angular_momentum_y(l: int) -> np.ndarray:
    m = np.arange(-l, l)
    raising = np.diag(np.sqrt((l - m) * (l + m + 1.0)), k=-1)
    return (raising - raising.T) / 2j


def wigner_d(l: int, beta: float) -> np.ndarray:
    """d^{(l)}(beta) indexed [j + l, m + l], from the spectral decomposition of J_y."""

    if l == 0:
        return np.ones((1, 1))
    eigenvalues, vectors = linalg.eigh(_angular_momentum_y(l))
    eigenvalues = np.rint(eigenvalues)
    matrix = (vectors * np.exp(-1j * beta * eigenvalues)) @ vectors.conj().T
    return matrix.real


@dataclass(frozen=True)
class WignerTable:
    """d^{(l)}_{jm}(pi/2) for every l <= lmax."""

    lmax: int
    matrices: Tuple[np.ndarray, ...]

    def value(self, l: int, j: int, m: int) -> float:
        return float(self.matrices[l][j + l, m + l])

    def matrix(self, l: int) -> np.ndarray:
        return self.matrices[l]


def wigner_table(lmax: int) -> WignerTable:
    if lmax < 0:
        raise ValueError("wigner_table needs lmax >= 0.")
    matrices = tuple(wigner_d(l, 0.5 * np.pi) for l in range(lmax + 1))
    logger.debug("Built Wigner table up to degree %d", lmax)
    return WignerTable(lmax=lmax, matrices=matrices)


def f_coeff(table: WignerTable, l: int, j_tilde: int, j: int, theta_s: float) -> complex:
    """F_{l j~ j}(theta_s) = e^{i(j-j~)pi/2} sum_m d_{j~m}(pi/2) d_{jm}(pi/2) e^{i m theta_s}."""

    d = table.matrix(l)
    m = np.arange(-l, l + 1)
    total = np.sum(d[j_tilde + l] * d[j + l] * np.exp(1j * m * theta_s))
    return complex(np.exp(0.5j * np.pi * (j - j_tilde)) * total)


def f_matrix(table: WignerTable, theta_s: float, lmax: int | None = None) -> np.ndarray:
    """All F_{l j~ j}(theta_s), indexed [l, j~ + lmax, j + lmax]."""

    lmax = table.lmax if lmax is None else lmax
    out = np.zeros((lmax + 1, 2 * lmax + 1, 2 * lmax + 1), dtype=complex)
    for l in range(lmax + 1):
        d = table.matrix(l)
        m = np.arange(-l, l + 1)
        block = (d * np.exp(1j * m * theta_s)) @ d.T
        phase = np.exp(0.5j * np.pi * (m[None, :] - m[:, None]))
        out[l, lmax - l : lmax + l + 1, lmax - l : lmax + l + 1] = phase * block
    return out


__all__ = [
    "assoc_legendre",
    "normalized_legendre",
    "HarmonicTable",
    "harmonic_table",
    "sph_harm",
    "grad_sph_harm",
    "alpha_coeff",
    "tangent_basis",
    "tangent_basis_derivatives",
    "z_basis",
    "z_basis_derivatives",
    "wigner_d",
    "WignerTable",
    "wigner_table",
    "f_coeff",
    "f_matrix",
]
