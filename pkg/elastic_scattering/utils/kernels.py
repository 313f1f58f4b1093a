"""Fundamental solution of the Helmholtz equation and the split boundary kernels.

Every kernel ``k(x, y)`` of the boundary operators is written as
``k = k_1 / |x_hat - y_hat| + k_2`` on the parameter sphere, with ``k_1`` and
``k_2`` smooth.  The ``1/|x_hat - y_hat|`` factor is what the singular
quadrature integrates exactly; the parametrised kernels returned here carry
the ratio ``R = |x_hat - y_hat| / |q(x_hat) - q(y_hat)|`` and the Jacobians.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .geometry import (
    ParametrizedSurface,
    e_phi,
    e_theta,
    normal_derivatives,
    surface_frame,
    unit_sphere_point,
)

logger = logging.getLogger(__name__)

NEAR_DIAGONAL = 1e-6


class InvalidMediumError(ValueError):
    """Raised for non-physical Lame parameters or frequency."""


class CoincidentPointsError(ValueError):
    """Raised when a singular kernel is evaluated at x = y."""


@dataclass(frozen=True)
class ElasticMedium:
    """Homogeneous isotropic background with Lame constants and frequency."""

    omega: float
    lam: float = 2.0
    mu: float = 1.0

    def __post_init__(self) -> None:
        if not self.omega > 0.0:
            raise InvalidMediumError(f"Frequency must be positive, got omega={self.omega}.")
        if not self.mu > 0.0:
            raise InvalidMediumError(f"Shear modulus must be positive, got mu={self.mu}.")
        if not self.lam + self.mu > 0.0:
            raise InvalidMediumError(
                f"Lame constants must satisfy lambda + mu > 0, got lambda={self.lam}, mu={self.mu}."
            )

    @property
    def kappa_p(self) -> float:
        return self.omega / np.sqrt(self.lam + 2.0 * self.mu)

    @property
    def kappa_s(self) -> float:
        return self.omega / np.sqrt(self.mu)


def wavenumbers(medium: ElasticMedium) -> Tuple[float, float]:
    """(kappa_p, kappa_s) = (omega / sqrt(lambda + 2 mu), omega / sqrt(mu))."""

    return medium.kappa_p, medium.kappa_s


def _distance(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise CoincidentPointsError("The fundamental solution is singular at x = y.")
    return diff, r


def fundamental_solution(x, y, kappa: float) -> np.ndarray:
    """Phi(x, y; kappa) = e^{i kappa |x-y|} / (4 pi |x-y|)."""

    _, r = _distance(x, y)
    return np.exp(1j * kappa * r) / (4.0 * np.pi * r)


def fundamental_gradient(x, y, kappa: float) -> np.ndarray:
    """grad_x Phi = (x - y)(i kappa r - 1) e^{i kappa r} / (4 pi r^3)."""

    diff, r = _distance(x, y)
    factor = (1j * kappa * r - 1.0) * np.exp(1j * kappa * r) / (4.0 * np.pi * r ** 3)
    return factor[..., None] * diff


def split_parts(r, kappa: float) -> Tuple[np.ndarray, np.ndarray]:
    """s_1 = cos(kappa r)/(2 pi), s_2 = i sin(kappa r)/(2 pi r) with s_2(0) = i kappa/(2 pi)."""

    r = np.asarray(r, dtype=float)
    s1 = np.cos(kappa * r) / (2.0 * np.pi)
    s2 = 1j * kappa / (2.0 * np.pi) * np.sinc(kappa * r / np.pi)
    return s1, s2


@dataclass(frozen=True)
class SurfaceSample:
    """Sphere point, surface point, Jacobian and normal at a set of parameters."""

    xhat: np.ndarray
    point: np.ndarray
    jacobian: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class KernelSample:
    """Weak (index 1) and smooth (index 2) parts of the parametrised kernels."""

    s_p1: np.ndarray
    s_p2: np.ndarray
    s_s1: np.ndarray
    s_s2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    m1: Optional[np.ndarray]
    m2: Optional[np.ndarray]
    ratio: np.ndarray
    sphere_distance: np.ndarray


def parametrized_kernels(
    x: SurfaceSample,
    y: SurfaceSample,
    medium: ElasticMedium,
    *,
    include_m: bool = True,
    near: Optional["NearDiagonalTerms"] = None,
) -> KernelSample:
    """Evaluate all split kernels for broadcastable sets of (x, y) pairs.

    ``near`` replaces the cancellation-prone ratios by their Taylor values
    where ``near.mask`` is set.
    """

    kappa_p, kappa_s = wavenumbers(medium)
    diff = x.point - y.point
    r = np.linalg.norm(diff, axis=-1)
    dhat = np.linalg.norm(x.xhat - y.xhat, axis=-1)
    safe_r = np.where(r > 0.0, r, 1.0)
    r2 = safe_r ** 2

    normal_ratio = np.sum(x.normal * diff, axis=-1) / r2
    ratio = dhat / safe_r
    if near is not None:
        normal_ratio = np.where(near.mask, near.normal_ratio, normal_ratio)
        ratio = np.where(near.mask, near.ratio, ratio)

    jy = y.jacobian
    jxy = x.jacobian * y.jacobian
    sp1, sp2 = split_parts(r, kappa_p)
    ss1, ss2 = split_parts(r, kappa_s)

    k1 = -normal_ratio * sp1 + 1j * kappa_p * normal_ratio * r ** 2 * sp2
    k2 = -normal_ratio * (sp2 - 1j * kappa_p * sp1)

    m1 = m2 = None
    if include_m:
        dnu = x.normal - y.normal
        direction = diff[..., :, None] * dnu[..., None, :] / r2[..., None, None]
        if near is not None:
            direction = np.where(near.mask[..., None, None], near.direction, direction)
        cross = direction - normal_ratio[..., None, None] * np.eye(3)
        beta1 = -ss1 + 1j * kappa_s * r ** 2 * ss2
        beta2 = 1j * kappa_s * ss1 - ss2
        m1 = (ratio * beta1 * jxy)[..., None, None] * cross
        m2 = (beta2 * jxy)[..., None, None] * cross

    return KernelSample(
        s_p1=ratio * sp1 * jy,
        s_p2=sp2 * jy,
        s_s1=ratio * ss1 * jy,
        s_s2=ss2 * jy,
        k1=ratio * k1 * jxy,
        k2=k2 * jxy,
        m1=m1,
        m2=m2,
        ratio=ratio,
        sphere_distance=dhat,
    )


@dataclass(frozen=True)
class NearDiagonalTerms:
    """Second-order Taylor values of the kernel ratios near x_hat = y_hat."""

    mask: np.ndarray
    normal_ratio: np.ndarray
    direction: np.ndarray
    ratio: np.ndarray


def near_diagonal_terms(surface: ParametrizedSurface, theta_x, phi_x, theta_y, phi_y) -> NearDiagonalTerms:
    """Taylor expansion of q about x_hat for pairs closer than ``NEAR_DIAGONAL``."""

    theta_x, phi_x, theta_y, phi_y = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (theta_x, phi_x, theta_y, phi_y))
    )
    xhat = unit_sphere_point(theta_x, phi_x)
    yhat = unit_sphere_point(theta_y, phi_y)
    mask = np.linalg.norm(xhat - yhat, axis=-1) < NEAR_DIAGONAL

    d_theta = (theta_y - theta_x)[..., None]
    d_phi = np.angle(np.exp(1j * (phi_y - phi_x)))[..., None]
    derivs = surface.derivatives(theta_x, phi_x)
    nd = normal_derivatives(surface, theta_x, phi_x)

    first = derivs.q_t * d_theta + derivs.q_p * d_phi
    second = derivs.q_tt * d_theta ** 2 + 2.0 * derivs.q_tp * d_theta * d_phi + derivs.q_pp * d_phi ** 2
    sphere_step = e_theta(theta_x, phi_x) * d_theta + np.sin(theta_x)[..., None] * e_phi(theta_x, phi_x) * d_phi
    normal_step = nd.normal_t * d_theta + nd.normal_p * d_phi

    length2 = np.sum(first * first, axis=-1)
    coincident = length2 == 0.0
    safe = np.where(coincident, 1.0, length2)

    normal_ratio = np.where(coincident, 0.0, -0.5 * np.sum(nd.frame.normal * second, axis=-1) / safe)
    direction = first[..., :, None] * normal_step[..., None, :] / safe[..., None, None]
    direction = np.where(coincident[..., None, None], 0.0, direction)
    ratio = np.where(
        coincident,
        1.0 / np.sqrt(nd.frame.jacobian),
        np.linalg.norm(sphere_step, axis=-1) / np.sqrt(safe),
    )
    return NearDiagonalTerms(mask=mask, normal_ratio=normal_ratio, direction=direction, ratio=ratio)


def sample_surface(surface: ParametrizedSurface, theta, phi) -> SurfaceSample:
    frame = surface_frame(surface, theta, phi)
    return SurfaceSample(
        xhat=unit_sphere_point(theta, phi),
        point=frame.point,
        jacobian=frame.jacobian,
        normal=frame.normal,
    )


def split_kernels_scalar(
    surface: ParametrizedSurface, medium: ElasticMedium, theta_x, phi_x, theta_y, phi_y
) -> Tuple[np.ndarray, ...]:
    """(S~p1, S~p2, S~s1, S~s2, K~1, K~2, R) at the parameter pairs."""

    near = near_diagonal_terms(surface, theta_x, phi_x, theta_y, phi_y)
    sample = parametrized_kernels(
        sample_surface(surface, theta_x, phi_x),
        sample_surface(surface, theta_y, phi_y),
        medium,
        include_m=False,
        near=near,
    )
    return sample.s_p1, sample.s_p2, sample.s_s1, sample.s_s2, sample.k1, sample.k2, sample.ratio


def split_kernels_m(
    surface: ParametrizedSurface, medium: ElasticMedium, theta_x, phi_x, theta_y, phi_y
) -> Tuple[np.ndarray, np.ndarray]:
    """(M~1, M~2) as (..., 3, 3) complex matrices acting on tangential densities at y."""

    near = near_diagonal_terms(surface, theta_x, phi_x, theta_y, phi_y)
    sample = parametrized_kernels(
        sample_surface(surface, theta_x, phi_x),
        sample_surface(surface, theta_y, phi_y),
        medium,
        near=near,
    )
    return sample.m1, sample.m2


__all__ = [
    "NEAR_DIAGONAL",
    "InvalidMediumError",
    "CoincidentPointsError",
    "ElasticMedium",
    "wavenumbers",
    "fundamental_solution",
    "fundamental_gradient",
    "split_parts",
    "SurfaceSample",
    "KernelSample",
    "NearDiagonalTerms",
    "parametrized_kernels",
    "near_diagonal_terms",
    "sample_surface",
    "split_kernels_scalar",
    "split_kernels_m",
]
