"""Gauss-Legendre x trapezoidal product rules on the unit sphere."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import eval_legendre

from .geometry import ParametrizedSurface, surface_frame, unit_sphere_point
from .rotation import rotation_to_pole
from .sphharm import normalized_legendre

logger = logging.getLogger(__name__)


class ShapeMismatchError(ValueError):
    """Raised when node samples do not match the rule's grid."""


@dataclass(frozen=True)
class SphericalQuadrature:
    """Product rule of order ``n``: n+1 Gauss latitudes times 2n+2 longitudes.

    Grid-shaped arrays are indexed ``[r, s]`` (longitude, latitude).
    """

    order: int
    z: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    mu: float
    nu: np.ndarray

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def n_phi(self) -> int:
        return self.phi.size

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_phi, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_phi * self.n_theta

    def grid(self) -> Tuple[np.ndarray, np.ndarray]:
        theta, phi = np.meshgrid(self.theta, self.phi)
        return theta, phi

    def points(self) -> np.ndarray:
        return unit_sphere_point(self.theta[None, :], self.phi[:, None])

    def weights(self) -> np.ndarray:
        return self.mu * np.broadcast_to(self.nu[None, :], self.shape)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Q_n(f) for samples of shape (n_phi, n_theta, ...)."""

        values = np.asarray(values)
        if values.shape[:2] != self.shape:
            raise ShapeMismatchError(
                f"Samples of shape {values.shape[:2]} do not match the {self.shape} grid."
            )
        return self.mu * np.tensordot(self.nu, values.sum(axis=0), axes=(0, 0))


def build_rule(n: int) -> SphericalQuadrature:
    """Rule of order n: theta_s = arccos z_s with z_s the zeros of P_{n+1}, phi_r = r pi/(n+1)."""

    if n < 0:
        raise ValueError("Quadrature order must be non-negative.")
    z, nu = leggauss(n + 1)
    phi = np.arange(2 * n + 2) * np.pi / (n + 1)
    return SphericalQuadrature(
        order=n,
        z=z,
        theta=np.arccos(z),
        phi=phi,
        mu=np.pi / (n + 1),
        nu=nu,
    )


def _check_samples(rule: SphericalQuadrature, samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.shape[:2] != rule.shape:
        if samples.ndim >= 1 and samples.shape[0] == rule.size:
            samples = samples.reshape(rule.shape + samples.shape[1:])
        else:
            raise ShapeMismatchError(
                f"Expected samples on the {rule.shape} grid ({rule.size} nodes), got {samples.shape}."
            )
    return samples


def discrete_project_scalar(rule: SphericalQuadrature, samples, n: int) -> np.ndarray:
    """(psi, Y_{l,j})_rule for l <= n, indexed [l, j + n]."""

    samples = _check_samples(rule, samples)
    orders = np.arange(-n, n + 1)
    fourier = rule.mu * np.einsum("rs,rj->js", samples, np.exp(-1j * np.outer(rule.phi, orders)))
    legendre = _signed_legendre(n, rule.theta)
    return np.einsum("ljs,js,s->lj", legendre, fourier, rule.nu)


def discrete_project_vector(rule: SphericalQuadrature, samples, n: int) -> np.ndarray:
    """Componentwise projection of a 3-vector field, indexed [component, l, j + n]."""

    samples = _check_samples(rule, samples)
    return np.stack([discrete_project_scalar(rule, samples[..., c], n) for c in range(3)])


def synthesize_scalar(coefficients: np.ndarray, theta, phi) -> np.ndarray:
    """Evaluate sum_{l,j} w_{lj} Y_{l,j} at arbitrary angles."""

    n = coefficients.shape[0] - 1
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    legendre = _signed_legendre(n, theta)
    orders = np.arange(-n, n + 1)
    phase = np.exp(1j * orders * phi[..., None])
    return np.einsum("lj,lj...,...j->...", coefficients, legendre, phase)


def _signed_legendre(n: int, theta: np.ndarray) -> np.ndarray:
    table = normalized_legendre(n, theta)
    orders = np.arange(-n, n + 1)
    sign = np.where(orders > 0, (-1.0) ** np.abs(orders), 1.0)
    return sign[(None, slice(None)) + (None,) * np.ndim(theta)] * table[:, np.abs(orders)]


@dataclass(frozen=True)
class SingularWeights:
    """alpha_{s'} = sum_{l<=n'} P_l(cos Theta_{s'}) on the inner rule of order n'."""

    rule: SphericalQuadrature
    alpha: np.ndarray

    @property
    def order(self) -> int:
        return self.rule.order

    def weights(self) -> np.ndarray:
        """xi * eta_{s'} * alpha_{s'} on the (n_phi, n_theta) inner grid."""

        return self.rule.mu * np.broadcast_to((self.rule.nu * self.alpha)[None, :], self.rule.shape)


def singular_weights(nprime: int) -> SingularWeights:
    rule = build_rule(nprime)
    degrees = np.arange(nprime + 1)[:, None]
    alpha = eval_legendre(degrees, rule.z[None, :]).sum(axis=0)
    return SingularWeights(rule=rule, alpha=alpha)


def integrate_weakly_singular(
    weights: SingularWeights, func: Callable[[np.ndarray], np.ndarray], theta: float, phi: float
) -> complex:
    """Approximate the integral of |x_hat - y_hat|^{-1} func(y_hat) over the sphere.

    ``func`` receives unit vectors of shape (n_phi', n_theta', 3); the inner
    grid is rotated so that its north pole lands on ``x_hat = p(theta, phi)``.
    """

    rotation = rotation_to_pole(theta, phi)
    points = np.einsum("ji,abj->abi", rotation, weights.rule.points())
    return complex(np.sum(weights.weights() * func(points)))


def surface_area(surface: ParametrizedSurface, n: int) -> float:
    """Q_n(J_q)."""

    rule = build_rule(n)
    theta, phi = rule.grid()
    return float(rule.integrate(surface_frame(surface, theta, phi).jacobian))


def gram_matrix(rule: SphericalQuadrature, n: int) -> np.ndarray:
    """Q(Y_{l,j} conj(Y_{l',j'})) for l, l' <= n in (l, j) lexicographic order."""

    values = _signed_legendre(n, rule.theta)
    rows = [(l, j) for l in range(n + 1) for j in range(-l, l + 1)]
    samples = np.stack(
        [values[l, j + n][None, :] * np.exp(1j * j * rule.phi)[:, None] for l, j in rows]
    )
    return np.einsum("ars,brs,s->ab", samples, samples.conj(), rule.nu) * rule.mu


__all__ = [
    "ShapeMismatchError",
    "SphericalQuadrature",
    "build_rule",
    "discrete_project_scalar",
    "discrete_project_vector",
    "synthesize_scalar",
    "SingularWeights",
    "singular_weights",
    "integrate_weakly_singular",
    "surface_area",
    "gram_matrix",
]
