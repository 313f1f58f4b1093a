"""Obstacle boundaries given as smooth images of the unit sphere.

Every surface is described by a map ``q`` from spherical angles ``(theta, phi)``
to a point in R^3 together with its analytic first and second partial
derivatives.  The frame quantities (tangent vectors, Jacobian, unit normal)
and their angular derivatives are computed from those derivatives, so no
finite differences enter the solver.

All functions are vectorised: angle arguments broadcast against each other
and vector valued results carry a trailing axis of length 3.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, NamedTuple, Tuple

import numpy as np

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-14


class PoleEvaluationError(ValueError):
    """Raised when a frame quantity is requested where sin(theta) = 0."""


class SurfaceKind(str, Enum):
    SPHERE = "sphere"
    ELLIPSOID = "ellipsoid"
    CUSHION = "cushion"
    BEAN = "bean"
    CUSTOM = "custom"


class MapDerivatives(NamedTuple):
    """``q`` and its partial derivatives with respect to theta and phi."""

    q: np.ndarray
    q_t: np.ndarray
    q_p: np.ndarray
    q_tt: np.ndarray
    q_tp: np.ndarray
    q_pp: np.ndarray


DerivativeFn = Callable[[np.ndarray, np.ndarray], MapDerivatives]


@dataclass(frozen=True)
class SurfaceFrame:
    """Point, tangent frame, Jacobian and unit normal at a set of angles."""

    point: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    jacobian: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class NormalDerivatives:
    """Angular derivatives of the unit normal, used by the tangent transport."""

    frame: SurfaceFrame
    normal_t: np.ndarray
    normal_p: np.ndarray


@dataclass(frozen=True)
class ParametrizedSurface:
    """A star-shaped boundary ``x = q(x_hat)`` with analytic derivatives."""

    kind: SurfaceKind
    derivatives: DerivativeFn = field(repr=False)
    name: str = ""

    def point(self, theta, phi) -> np.ndarray:
        theta, phi = _broadcast_angles(theta, phi)
        return self.derivatives(theta, phi).q

    def t1(self, theta, phi) -> np.ndarray:
        return surface_frame(self, theta, phi).t1

    def t2(self, theta, phi) -> np.ndarray:
        return surface_frame(self, theta, phi).t2

    def jacobian(self, theta, phi) -> np.ndarray:
        return surface_frame(self, theta, phi).jacobian

    def normal(self, theta, phi) -> np.ndarray:
        return surface_frame(self, theta, phi).normal


def _broadcast_angles(theta, phi) -> Tuple[np.ndarray, np.ndarray]:
    theta, phi = np.broadcast_arrays(
        np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    )
    return theta, phi


def _stack(x, y, z) -> np.ndarray:
    x, y, z = np.broadcast_arrays(x, y, z)
    return np.stack([x, y, z], axis=-1)


def unit_sphere_point(theta, phi) -> np.ndarray:
    """p(theta, phi) = (sin t cos p, sin t sin p, cos t)."""

    theta, phi = _broadcast_angles(theta, phi)
    st = np.sin(theta)
    return _stack(st * np.cos(phi), st * np.sin(phi), np.cos(theta))


def e_theta(theta, phi) -> np.ndarray:
    theta, phi = _broadcast_angles(theta, phi)
    ct = np.cos(theta)
    return _stack(ct * np.cos(phi), ct * np.sin(phi), -np.sin(theta))


def e_phi(theta, phi) -> np.ndarray:
    theta, phi = _broadcast_angles(theta, phi)
    return _stack(-np.sin(phi), np.cos(phi), np.zeros_like(theta))


def cartesian_to_angles(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Spherical angles of unit vectors, phi wrapped into [0, 2 pi)."""

    points = np.asarray(points, dtype=float)
    theta = np.arctan2(np.hypot(points[..., 0], points[..., 1]), points[..., 2])
    phi = np.mod(np.arctan2(points[..., 1], points[..., 0]), 2.0 * np.pi)
    return theta, phi


# ---------------------------------------------------------------------------
# Built-in parametrisations
# ---------------------------------------------------------------------------


def sphere_derivatives(theta, phi) -> MapDerivatives:
    theta, phi = _broadcast_angles(theta, phi)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    zero = np.zeros_like(theta)
    return MapDerivatives(
        q=_stack(st * cp, st * sp, ct),
        q_t=_stack(ct * cp, ct * sp, -st),
        q_p=_stack(-st * sp, st * cp, zero),
        q_tt=_stack(-st * cp, -st * sp, -ct),
        q_tp=_stack(-ct * sp, ct * cp, zero),
        q_pp=_stack(-st * cp, -st * sp, zero),
    )


def _scaled_derivatives(axes: Tuple[float, float, float]) -> DerivativeFn:
    scale = np.asarray(axes, dtype=float)

    def derivatives(theta, phi) -> MapDerivatives:
        base = sphere_derivatives(theta, phi)
        return MapDerivatives(*(component * scale for component in base))

    return derivatives


def _radial_derivatives(
    base: MapDerivatives,
    r: np.ndarray,
    r_t: np.ndarray,
    r_p: np.ndarray,
    r_tt: np.ndarray,
    r_tp: np.ndarray,
    r_pp: np.ndarray,
) -> MapDerivatives:
    """Product rule for q = r(theta, phi) p(theta, phi)."""

    p, p_t, p_p, p_tt, p_tp, p_pp = base
    r, r_t, r_p, r_tt, r_tp, r_pp = (
        value[..., None] for value in (r, r_t, r_p, r_tt, r_tp, r_pp)
    )
    return MapDerivatives(
        q=r * p,
        q_t=r_t * p + r * p_t,
        q_p=r_p * p + r * p_p,
        q_tt=r_tt * p + 2.0 * r_t * p_t + r * p_tt,
        q_tp=r_tp * p + r_t * p_p + r_p * p_t + r * p_tp,
        q_pp=r_pp * p + 2.0 * r_p * p_p + r * p_pp,
    )


def cushion_derivatives(theta, phi) -> MapDerivatives:
    """r = sqrt(0.27 + 0.065 (cos 2phi - 1)(cos 4theta - 1))."""

    theta, phi = _broadcast_angles(theta, phi)
    a = np.cos(2.0 * phi) - 1.0
    a_p = -2.0 * np.sin(2.0 * phi)
    a_pp = -4.0 * np.cos(2.0 * phi)
    b = np.cos(4.0 * theta) - 1.0
    b_t = -4.0 * np.sin(4.0 * theta)
    b_tt = -16.0 * np.cos(4.0 * theta)

    g = 0.27 + 0.065 * a * b
    g_t = 0.065 * a * b_t
    g_p = 0.065 * a_p * b
    g_tt = 0.065 * a * b_tt
    g_tp = 0.065 * a_p * b_t
    g_pp = 0.065 * a_pp * b

    r = np.sqrt(g)
    r3 = r ** 3
    return _radial_derivatives(
        sphere_derivatives(theta, phi),
        r,
        g_t / (2.0 * r),
        g_p / (2.0 * r),
        g_tt / (2.0 * r) - g_t ** 2 / (4.0 * r3),
        g_tp / (2.0 * r) - g_t * g_p / (4.0 * r3),
        g_pp / (2.0 * r) - g_p ** 2 / (4.0 * r3),
    )


def _bean_semi_axis(theta: np.ndarray, kappa: float):
    """a(theta) = sqrt(0.64 (1 - kappa cos(pi cos theta))) sin theta and derivatives."""

    st, ct = np.sin(theta), np.cos(theta)
    u = np.pi * ct
    u_t = -np.pi * st
    u_tt = -np.pi * ct

    h = 0.64 * (1.0 - kappa * np.cos(u))
    h_t = 0.64 * kappa * np.sin(u) * u_t
    h_tt = 0.64 * kappa * (np.cos(u) * u_t ** 2 + np.sin(u) * u_tt)

    s = np.sqrt(h)
    s_t = h_t / (2.0 * s)
    s_tt = h_tt / (2.0 * s) - h_t ** 2 / (4.0 * s ** 3)

    value = s * st
    value_t = s_t * st + s * ct
    value_tt = s_tt * st + 2.0 * s_t * ct - s * st
    return value, value_t, value_tt


def bean_derivatives(theta, phi) -> MapDerivatives:
    """Slice parametrisation: x3 = cos theta, a shifted ellipse in (x1, x2) per slice."""

    theta, phi = _broadcast_angles(theta, phi)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    zero = np.zeros_like(theta)

    a, a_t, a_tt = _bean_semi_axis(theta, 0.1)
    b, b_t, b_tt = _bean_semi_axis(theta, 0.4)

    u = np.pi * ct
    u_t = -np.pi * st
    u_tt = -np.pi * ct
    shift = -0.3 * np.cos(u)
    shift_t = 0.3 * np.sin(u) * u_t
    shift_tt = 0.3 * (np.cos(u) * u_t ** 2 + np.sin(u) * u_tt)

    return MapDerivatives(
        q=_stack(a * cp, b * sp + shift, ct),
        q_t=_stack(a_t * cp, b_t * sp + shift_t, -st),
        q_p=_stack(-a * sp, b * cp, zero),
        q_tt=_stack(a_tt * cp, b_tt * sp + shift_tt, -ct),
        q_tp=_stack(-a_t * sp, b_t * cp, zero),
        q_pp=_stack(-a * cp, -b * sp, zero),
    )


def sphere() -> ParametrizedSurface:
    return ParametrizedSurface(SurfaceKind.SPHERE, sphere_derivatives, "sphere")


def ellipsoid(axes: Tuple[float, float, float] = (1.0, 0.75, 0.5)) -> ParametrizedSurface:
    return ParametrizedSurface(SurfaceKind.ELLIPSOID, _scaled_derivatives(axes), "ellipsoid")


def cushion() -> ParametrizedSurface:
    return ParametrizedSurface(SurfaceKind.CUSHION, cushion_derivatives, "cushion")


def bean() -> ParametrizedSurface:
    return ParametrizedSurface(SurfaceKind.BEAN, bean_derivatives, "bean")


_SURFACE_FACTORIES: Dict[str, Callable[[], ParametrizedSurface]] = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "cushion": cushion,
    "bean": bean,
}


def register_surface(name: str, derivatives: DerivativeFn) -> ParametrizedSurface:
    """Register a user supplied map so it can be selected by name.

    ``derivatives(theta, phi)`` must return a :class:`MapDerivatives` with the
    map and its first and second partial derivatives.  Only a Jacobian
    positivity scan is performed; smoothness is the caller's responsibility.
    """

    surface = ParametrizedSurface(SurfaceKind.CUSTOM, derivatives, name)
    theta = np.linspace(0.0, np.pi, 102)[1:-1]
    phi = np.linspace(0.0, 2.0 * np.pi, 200, endpoint=False)
    jacobian = surface_frame(surface, theta[None, :], phi[:, None]).jacobian
    if not np.all(jacobian > 0.0):
        raise ValueError(f"Custom surface '{name}' has a vanishing Jacobian.")

    _SURFACE_FACTORIES[name] = lambda: surface
    logger.info("Registered custom surface '%s'", name)
    return surface


def get_surface(name: str) -> ParametrizedSurface:
    try:
        return _SURFACE_FACTORIES[name.lower()]()
    except KeyError as exc:
        known = ", ".join(sorted(_SURFACE_FACTORIES))
        raise ValueError(f"Unknown geometry '{name}'. Known geometries: {known}.") from exc


def available_surfaces() -> Tuple[str, ...]:
    return tuple(sorted(_SURFACE_FACTORIES))


# ---------------------------------------------------------------------------
# Frame quantities
# ---------------------------------------------------------------------------


def _sin_theta(theta: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    if np.any(np.abs(st) < POLE_TOLERANCE):
        raise PoleEvaluationError("Normal derivatives are undefined at the poles (sin(theta) = 0).")
    return st


def _second_tangent(derivs: MapDerivatives, theta: np.ndarray) -> np.ndarray:
    """t2 = q_phi / sin(theta), replaced by its limit q_{theta phi} / cos(theta) at the poles."""

    st = np.sin(theta)
    at_pole = np.abs(st) < POLE_TOLERANCE
    if not np.any(at_pole):
        return derivs.q_p / st[..., None]
    regular = derivs.q_p / np.where(at_pole, 1.0, st)[..., None]
    limit = derivs.q_tp / np.cos(theta)[..., None]
    return np.where(at_pole[..., None], limit, regular)


def _frame_from_derivatives(derivs: MapDerivatives, theta: np.ndarray) -> SurfaceFrame:
    t1 = derivs.q_t
    t2 = _second_tangent(derivs, theta)
    cross = np.cross(t1, t2)
    jacobian = np.linalg.norm(cross, axis=-1)
    return SurfaceFrame(
        point=derivs.q,
        t1=t1,
        t2=t2,
        jacobian=jacobian,
        normal=cross / jacobian[..., None],
    )


def surface_frame(surface: ParametrizedSurface, theta, phi) -> SurfaceFrame:
    """Point, tangents t1 = dq/dtheta, t2 = (1/sin theta) dq/dphi, J_q and nu.

    At the poles q_phi vanishes and t2 is its limit, so point, J_q and nu
    stay well defined there; t1 and t2 then depend on phi.
    """

    theta, phi = _broadcast_angles(theta, phi)
    return _frame_from_derivatives(surface.derivatives(theta, phi), theta)


def dsq_matrix(surface: ParametrizedSurface, theta, phi) -> np.ndarray:
    """[D q] = t1 (x) e_theta + t2 (x) e_phi, shape (..., 3, 3)."""

    frame = surface_frame(surface, theta, phi)
    return (
        frame.t1[..., :, None] * e_theta(theta, phi)[..., None, :]
        + frame.t2[..., :, None] * e_phi(theta, phi)[..., None, :]
    )


def normal_derivatives(surface: ParametrizedSurface, theta, phi) -> NormalDerivatives:
    """d nu / d theta and d nu / d phi from the second derivatives of q."""

    theta, phi = _broadcast_angles(theta, phi)
    st = _sin_theta(theta)
    ct = np.cos(theta)
    derivs = surface.derivatives(theta, phi)
    frame = _frame_from_derivatives(derivs, theta)

    inv_s = (1.0 / st)[..., None]
    t1, t2 = frame.t1, frame.t2
    t1_t = derivs.q_tt
    t1_p = derivs.q_tp
    t2_t = derivs.q_tp * inv_s - (ct / st ** 2)[..., None] * derivs.q_p
    t2_p = derivs.q_pp * inv_s

    nu = frame.normal
    jac = frame.jacobian[..., None]
    out = []
    for cross_d in (np.cross(t1_t, t2) + np.cross(t1, t2_t), np.cross(t1_p, t2) + np.cross(t1, t2_p)):
        along = np.sum(nu * cross_d, axis=-1, keepdims=True)
        out.append((cross_d - along * nu) / jac)

    return NormalDerivatives(frame=frame, normal_t=out[0], normal_p=out[1])


__all__ = [
    "POLE_TOLERANCE",
    "PoleEvaluationError",
    "SurfaceKind",
    "MapDerivatives",
    "SurfaceFrame",
    "NormalDerivatives",
    "ParametrizedSurface",
    "unit_sphere_point",
    "e_theta",
    "e_phi",
    "cartesian_to_angles",
    "sphere",
    "ellipsoid",
    "cushion",
    "bean",
    "register_surface",
    "get_surface",
    "available_surfaces",
    "surface_frame",
    "dsq_matrix",
    "normal_derivatives",
]
