"""Galerkin assembly of the coupled boundary integral system.

The unknowns are the coefficients of the scalar density in ``Y_{l,j}`` and of
the tangential density in ``Z^{(1)}_{l,j}, Z^{(2)}_{l,j}``.  The system reads::

    [ -I + K   N^1          N^2         ] [ w    ]   [ 2 (J f1, Y)   ]
    [ H^1      U^11 + M^11  U^12 + M^12 ] [ W^1  ] = [ 2 (J f2, Z^1) ]
    [ H^2      U^21 + M^21  U^22 + M^22 ] [ W^2  ]   [ 2 (J f2, Z^2) ]

Entries are tested with the outer rule of order n+1.  Weakly singular inner
integrals use the rule of order n' rotated about every outer node; the
trial harmonics at the rotated nodes are expanded through the Wigner
coefficients, so each block is a chain of small tensor contractions per
outer latitude.  ``direct_block_entry`` evaluates single entries by the
literal quadruple sum and serves as the oracle for the chains.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .fields import IncidentField, incident_trace
from .geometry import ParametrizedSurface, dsq_matrix, surface_frame, unit_sphere_point
from .kernels import ElasticMedium, KernelSample, SurfaceSample, parametrized_kernels
from .quadrature import SingularWeights, SphericalQuadrature, build_rule, singular_weights
from .rotation import RotationFrame, rotated_latitude, tangent_transport, tangent_transport_derivatives
from .solver import HarmonicLayout, harmonic_layout
from .sphharm import (
    HarmonicTable,
    WignerTable,
    f_matrix,
    grad_sph_harm,
    harmonic_table,
    sph_harm,
    tangent_basis,
    tangent_basis_derivatives,
    wigner_table,
    z_basis,
    z_basis_derivatives,
)

logger = logging.getLogger(__name__)

BLOCK_NAMES = ("K", "N", "H", "M", "I", "U", "S_p", "S_s")


@dataclass(frozen=True)
class OuterNodes:
    """Frame data at the outer nodes, arrays indexed [r, s, ...]."""

    theta: np.ndarray
    phi: np.ndarray
    xhat: np.ndarray
    point: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    jacobian: np.ndarray
    normal: np.ndarray
    transport: np.ndarray
    basis: np.ndarray
    basis_t: np.ndarray
    basis_p: np.ndarray

    def sample(self, s: int) -> SurfaceSample:
        return SurfaceSample(
            xhat=self.xhat[:, s],
            point=self.point[:, s],
            jacobian=self.jacobian[:, s],
            normal=self.normal[:, s],
        )


def _outer_nodes(surface: ParametrizedSurface, rule: SphericalQuadrature) -> OuterNodes:
    theta, phi = rule.grid()
    transport = tangent_transport_derivatives(surface, theta, phi)
    frame = transport.frame
    v = tangent_basis(theta, phi)
    v_t, v_p = tangent_basis_derivatives(theta, phi)
    apply = lambda matrix, vectors: np.einsum("...ij,...dj->...di", matrix, vectors)  # noqa: E731
    return OuterNodes(
        theta=theta,
        phi=phi,
        xhat=unit_sphere_point(theta, phi),
        point=frame.point,
        t1=frame.t1,
        t2=frame.t2,
        jacobian=frame.jacobian,
        normal=frame.normal,
        transport=transport.matrix,
        basis=apply(transport.matrix, v),
        basis_t=apply(transport.matrix_t, v) + apply(transport.matrix, v_t),
        basis_p=apply(transport.matrix_p, v) + apply(transport.matrix, v_p),
    )


@dataclass(frozen=True)
class AssemblyContext:
    """Everything the chains need, built once per (surface, medium, n, n')."""

    surface: ParametrizedSurface
    medium: ElasticMedium
    n: int
    nprime: int
    outer: SphericalQuadrature
    singular: SingularWeights
    wigner: WignerTable
    outer_nodes: OuterNodes = field(repr=False)
    outer_table: HarmonicTable = field(repr=False)
    inner_table: HarmonicTable = field(repr=False)
    threads: int = 1

    @property
    def inner(self) -> SphericalQuadrature:
        return self.singular.rule

    @property
    def layout(self) -> HarmonicLayout:
        return harmonic_layout(self.n)


def build_context(
    surface: ParametrizedSurface,
    medium: ElasticMedium,
    n: int,
    nprime: Optional[int] = None,
    threads: int = 1,
) -> AssemblyContext:
    """Quadrature rules, Legendre/alpha tables, Wigner table and outer frame data."""

    if n < 1:
        raise ValueError(f"Ansatz degree must be at least 1, got n={n}.")
    nprime = 2 * n + 1 if nprime is None else nprime
    if nprime < n + 1:
        raise ValueError(f"Inner degree n'={nprime} must be at least n+1={n + 1}.")

    start = time.perf_counter()
    outer = build_rule(n + 1)
    singular = singular_weights(nprime)
    context = AssemblyContext(
        surface=surface,
        medium=medium,
        n=n,
        nprime=nprime,
        outer=outer,
        singular=singular,
        wigner=wigner_table(n),
        outer_nodes=_outer_nodes(surface, outer),
        outer_table=harmonic_table(n, outer.theta),
        inner_table=harmonic_table(n, singular.rule.theta),
        threads=max(1, int(threads)),
    )
    logger.debug(
        "Assembly context for %s: n=%d, n'=%d, outer %s, inner %s (%.3fs)",
        surface.name,
        n,
        nprime,
        outer.shape,
        singular.rule.shape,
        time.perf_counter() - start,
    )
    return context


# ---------------------------------------------------------------------------
# Per-latitude data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Latitude:
    index: int
    rotation: RotationFrame
    kernels: KernelSample
    trial_basis: np.ndarray
    weak_weight: np.ndarray


def _latitude(context: AssemblyContext, s: int, include_m: bool) -> _Latitude:
    rotation = rotated_latitude(context.outer, context.inner, s)
    frame = surface_frame(context.surface, rotation.rotated_theta, rotation.rotated_phi)
    y = SurfaceSample(
        xhat=rotation.points,
        point=frame.point,
        jacobian=frame.jacobian,
        normal=frame.normal,
    )
    x = context.outer_nodes.sample(s)
    x = SurfaceSample(*(value[:, None, None] for value in (x.xhat, x.point, x.jacobian, x.normal)))
    kernels = parametrized_kernels(x, y, context.medium, include_m=include_m)

    # F(y_hat) T^{-1} v^{(d)}(Theta, Phi) at every rotated node.
    inner_basis = tangent_basis(context.inner.theta[None, :], context.inner.phi[:, None])
    rotated_basis = np.einsum("rij,abdj->rabdi", rotation.inverse, inner_basis)
    transport = tangent_transport(context.surface, rotation.rotated_theta, rotation.rotated_phi, frame)
    trial_basis = np.einsum("rabij,rabdj->rabdi", transport, rotated_basis)

    return _Latitude(
        index=s,
        rotation=rotation,
        kernels=kernels,
        trial_basis=trial_basis,
        weak_weight=context.singular.alpha,
    )


class _Chain:
    """Shared factors of the decomposition chains at one outer latitude."""

    def __init__(self, context: AssemblyContext, s: int) -> None:
        lmax = context.n
        orders = np.arange(-lmax, lmax + 1)
        inner, outer = context.inner, context.outer
        self.orders = orders
        self.theta = float(outer.theta[s])
        self.sin_theta = np.sin(self.theta)
        self.nu = float(outer.nu[s])
        self.inner_phase = inner.mu * np.exp(1j * np.outer(inner.phi, orders))
        self.inner_values = context.inner_table.values * inner.nu
        self.inner_alpha = context.inner_table.alpha * inner.nu
        rotation = f_matrix(context.wigner, self.theta, lmax)
        shift = np.exp(1j * outer.phi[:, None, None] * (orders[None, None, :] - orders[None, :, None]))
        self.rotation = rotation[None] * shift[:, None]
        self.test_phase = outer.mu * np.exp(-1j * np.outer(outer.phi, orders))
        self.trial_phase = np.exp(1j * np.outer(outer.phi, orders))
        self.values = context.outer_table.values[..., s]
        self.theta_derivative = context.outer_table.theta_derivative[..., s]
        self.alpha = context.outer_table.alpha[..., s]
        self.alpha_derivative = context.outer_table.alpha_derivative[..., s]

    def close(self, partial: np.ndarray) -> np.ndarray:
        """sum over j~ with F e^{i(j-j~)phi_r}, then sum over r with mu e^{-i j' phi_r}."""

        rotated = np.einsum("rlkj,...rlk->...rlj", self.rotation, partial)
        return self.test_phase_sum(rotated)

    def test_phase_sum(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("rp,...rlj->...plj", self.test_phase, values)

    def scalar_test(self, b: np.ndarray) -> np.ndarray:
        return self.nu * self.values[:, :, None, None] * b[None]

    def tangential_test(self, b: np.ndarray) -> np.ndarray:
        """sum_{d'} conj(alpha^{(k',d')}_{l'j'}) b[..., d', j', l, j] -> [k', ..., l', j', l, j]."""

        return self.nu * np.einsum("qeLp,...eplj->q...Lplj", self.alpha.conj(), b)


def _scalar_chain(chain: _Chain, kernel: np.ndarray) -> np.ndarray:
    partial = np.einsum("rab,aj->rbj", kernel, chain.inner_phase)
    partial = np.einsum("ljb,rbj->rlj", chain.inner_values, partial)
    return chain.scalar_test(chain.close(partial))


def _combine(latitude: _Latitude, weak: np.ndarray, smooth: np.ndarray) -> np.ndarray:
    alpha = latitude.weak_weight
    if weak.ndim > 3:
        return alpha[None, None, :, None, None] * weak + smooth
    return alpha[None, None, :] * weak + smooth


def _n_chain(chain: _Chain, context: AssemblyContext, latitude: _Latitude) -> np.ndarray:
    s = latitude.index
    nodes = context.outer_nodes
    kernel = _combine(latitude, latitude.kernels.s_s1, latitude.kernels.s_s2)
    tangents = -np.stack([nodes.t2[:, s], nodes.t1[:, s]], axis=1)
    projected = np.einsum("rabdi,rhi->rabdh", latitude.trial_basis, tangents)
    partial = np.einsum("rabdh,aj->rbjdh", kernel[..., None, None] * projected, chain.inner_phase)
    partial = np.einsum("kdljb,rbjdh->khrlj", chain.inner_alpha, partial)
    b = chain.close(partial)
    curl_factor = 1j * chain.orders[None, :] / chain.sin_theta * chain.values
    return chain.nu * (
        chain.theta_derivative[None, :, :, None, None] * b[:, 0, None]
        + curl_factor[None, :, :, None, None] * b[:, 1, None]
    )


def _h_chain(chain: _Chain, context: AssemblyContext, latitude: _Latitude) -> np.ndarray:
    s = latitude.index
    nodes = context.outer_nodes
    kernel = _combine(latitude, latitude.kernels.s_p1, latitude.kernels.s_p2)
    partial = np.einsum("rab,aj->rbj", kernel, chain.inner_phase)
    partial = np.einsum("ljb,rbj->rlj", chain.inner_values, partial)
    rotated = np.einsum("rlkj,rlk->rlj", chain.rotation, partial)

    t1, t2 = nodes.t1[:, s], nodes.t2[:, s]
    basis, basis_t, basis_p = nodes.basis[:, s], nodes.basis_t[:, s], nodes.basis_p[:, s]
    geometric = np.stack(
        [
            np.einsum("rdi,ri->dr", basis, t1) / chain.sin_theta,
            np.einsum("rdi,ri->dr", basis_p, t1) / chain.sin_theta,
            -np.einsum("rdi,ri->dr", basis, t2),
            -np.einsum("rdi,ri->dr", basis_t, t2),
        ]
    )
    b = np.einsum("rp,wdr,rlj->wdplj", chain.test_phase, geometric, rotated)

    alpha = chain.alpha.conj()
    ij_alpha = (1j * chain.orders[None, None, None, :] * chain.alpha).conj()
    d_alpha = chain.alpha_derivative.conj()
    return chain.nu * (
        np.einsum("qdLp,dplj->qLplj", ij_alpha, b[0])
        + np.einsum("qdLp,dplj->qLplj", alpha, b[1])
        + np.einsum("qdLp,dplj->qLplj", d_alpha, b[2])
        + np.einsum("qdLp,dplj->qLplj", alpha, b[3])
    )


def _m_chain(chain: _Chain, context: AssemblyContext, latitude: _Latitude) -> np.ndarray:
    s = latitude.index
    kernel = _combine(latitude, latitude.kernels.m1, latitude.kernels.m2)
    test_basis = context.outer_nodes.basis[:, s]
    scalar = np.einsum("rei,rabij,rabdj->rabde", test_basis, kernel, latitude.trial_basis)
    partial = np.einsum("rabde,aj->rbjde", scalar, chain.inner_phase)
    partial = np.einsum("kdljb,rbjde->kerlj", chain.inner_alpha, partial)
    return chain.tangential_test(chain.close(partial))


def _identity_chains(chain: _Chain, context: AssemblyContext, s: int) -> Tuple[np.ndarray, np.ndarray]:
    jacobian = context.outer_nodes.jacobian[:, s]
    weighted = chain.trial_phase * jacobian[:, None]
    scalar = chain.test_phase_sum(chain.values[None] * weighted[:, None, :])
    tangential = chain.test_phase_sum(chain.alpha[:, :, None] * weighted[None, None, :, None, :])
    return chain.scalar_test(scalar), chain.tangential_test(tangential)


def _latitude_blocks(context: AssemblyContext, s: int, blocks: Sequence[str]) -> Dict[str, np.ndarray]:
    chain = _Chain(context, s)
    out: Dict[str, np.ndarray] = {}
    needs_inner = any(name in blocks for name in ("K", "N", "H", "M", "S_p", "S_s"))
    if needs_inner:
        latitude = _latitude(context, s, include_m="M" in blocks)
        kernels = latitude.kernels
        if "K" in blocks:
            out["K"] = _scalar_chain(chain, _combine(latitude, kernels.k1, kernels.k2))
        if "S_p" in blocks:
            out["S_p"] = _scalar_chain(chain, _combine(latitude, kernels.s_p1, kernels.s_p2))
        if "S_s" in blocks:
            out["S_s"] = _scalar_chain(chain, _combine(latitude, kernels.s_s1, kernels.s_s2))
        if "N" in blocks:
            out["N"] = _n_chain(chain, context, latitude)
        if "H" in blocks:
            out["H"] = _h_chain(chain, context, latitude)
        if "M" in blocks:
            out["M"] = _m_chain(chain, context, latitude)
    if "I" in blocks or "U" in blocks:
        identity, gram = _identity_chains(chain, context, s)
        if "I" in blocks:
            out["I"] = identity
        if "U" in blocks:
            out["U"] = gram
    return out


def _accumulate(context: AssemblyContext, blocks: Iterable[str]) -> Dict[str, np.ndarray]:
    blocks = tuple(blocks)
    unknown = set(blocks) - set(BLOCK_NAMES)
    if unknown:
        raise ValueError(f"Unknown block names: {sorted(unknown)}")

    latitudes = range(context.outer.n_theta)
    start = time.perf_counter()
    if context.threads == 1:
        partials = (_latitude_blocks(context, s, blocks) for s in latitudes)
    else:
        partials = Parallel(n_jobs=context.threads, prefer="threads", return_as="generator")(
            delayed(_latitude_blocks)(context, s, blocks) for s in latitudes
        )

    totals: Dict[str, np.ndarray] = {}
    for partial in partials:
        for name, value in partial.items():
            if name in totals:
                totals[name] += value
            else:
                totals[name] = value
    logger.debug("Chains %s over %d latitudes in %.3fs", ",".join(blocks), len(latitudes), time.perf_counter() - start)
    return totals


# ---------------------------------------------------------------------------
# Block extraction
# ---------------------------------------------------------------------------


def _to_matrix(tensor: np.ndarray, lmax: int, rows: Tuple[np.ndarray, np.ndarray], cols: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    row_l, row_j = rows
    col_l, col_j = cols
    return tensor[row_l[:, None], row_j[:, None] + lmax, col_l[None, :], col_j[None, :] + lmax]


def assemble_k_block(context: AssemblyContext) -> np.ndarray:
    """K_{l'j',lj} = (K Y_{l,j}, Y_{l',j'})_{n+1} with J_q(x_hat) folded into the kernel."""

    layout = context.layout
    tensor = _accumulate(context, ("K",))["K"]
    return _to_matrix(tensor, context.n, layout.scalar, layout.scalar)


def assemble_single_layer_block(context: AssemblyContext, kind: str = "p") -> np.ndarray:
    """(S^sigma Y_{l,j}, Y_{l',j'})_{n+1} for sigma in {'p', 's'}."""

    name = {"p": "S_p", "s": "S_s"}.get(kind)
    if name is None:
        raise ValueError(f"Single-layer kind must be 'p' or 's', got {kind!r}.")
    layout = context.layout
    tensor = _accumulate(context, (name,))[name]
    return _to_matrix(tensor, context.n, layout.scalar, layout.scalar)


def assemble_n_block(context: AssemblyContext, k: int) -> np.ndarray:
    """N^{k}: trial Z^{(k)}, tested against [D q] curl Y_{l',j'}."""

    layout = context.layout
    tensor = _accumulate(context, ("N",))["N"][k - 1]
    return _to_matrix(tensor, context.n, layout.scalar, layout.tangential)


def assemble_h_block(context: AssemblyContext, k: int) -> np.ndarray:
    """H^{k'}: trial Y_{l,j}, tested against the surface curl of Z^{(k')}."""

    layout = context.layout
    tensor = _accumulate(context, ("H",))["H"][k - 1]
    return _to_matrix(tensor, context.n, layout.tangential, layout.scalar)


def assemble_m_block(context: AssemblyContext, k_test: int, k_trial: int) -> np.ndarray:
    layout = context.layout
    tensor = _accumulate(context, ("M",))["M"][k_test - 1, k_trial - 1]
    return _to_matrix(tensor, context.n, layout.tangential, layout.tangential)


def assemble_identity_blocks(context: AssemblyContext) -> Tuple[np.ndarray, Dict[Tuple[int, int], np.ndarray]]:
    """Gram matrices (J Y, Y') and (J Z^{(k)}, Z^{(k')}) under the outer rule."""

    layout = context.layout
    totals = _accumulate(context, ("I", "U"))
    identity = _to_matrix(totals["I"], context.n, layout.scalar, layout.scalar)
    gram = {
        (q + 1, k + 1): _to_matrix(totals["U"][q, k], context.n, layout.tangential, layout.tangential)
        for q in range(2)
        for k in range(2)
    }
    return identity, gram


def assemble_matrix(context: AssemblyContext) -> np.ndarray:
    """The full dense Galerkin matrix in the documented block layout."""

    layout = context.layout
    lmax = context.n
    start = time.perf_counter()
    totals = _accumulate(context, ("K", "N", "H", "M", "I", "U"))

    ny, nz = layout.ny, layout.nz
    matrix = np.zeros((layout.dimension, layout.dimension), dtype=complex)
    scalar, tangential = layout.scalar, layout.tangential

    matrix[:ny, :ny] = _to_matrix(totals["K"] - totals["I"], lmax, scalar, scalar)
    for k in range(2):
        cols = slice(ny + k * nz, ny + (k + 1) * nz)
        matrix[:ny, cols] = _to_matrix(totals["N"][k], lmax, scalar, tangential)
        matrix[cols, :ny] = _to_matrix(totals["H"][k], lmax, tangential, scalar)
        for q in range(2):
            rows = slice(ny + q * nz, ny + (q + 1) * nz)
            combined = totals["U"][q, k] + totals["M"][q, k]
            matrix[rows, cols] = _to_matrix(combined, lmax, tangential, tangential)

    if not np.all(np.isfinite(matrix)):
        raise FloatingPointError("Assembled matrix contains non-finite entries.")
    logger.info(
        "Assembled %dx%d system for %s (n=%d, n'=%d) in %.2fs",
        layout.dimension,
        layout.dimension,
        context.surface.name,
        context.n,
        context.nprime,
        time.perf_counter() - start,
    )
    return matrix


def assemble_rhs(context: AssemblyContext, incident: IncidentField) -> np.ndarray:
    """[2 (J f1, Y); 2 (J f2, Z^1); 2 (J f2, Z^2)] under the outer rule."""

    layout = context.layout
    lmax = context.n
    nodes = context.outer_nodes
    outer = context.outer
    f1, f2 = incident_trace(incident, context.surface, nodes.theta, nodes.phi)

    orders = np.arange(-lmax, lmax + 1)
    test_phase = outer.mu * np.exp(-1j * np.outer(outer.phi, orders))

    scalar_fourier = np.einsum("rp,rs->ps", test_phase, nodes.jacobian * f1)
    scalar = 2.0 * np.einsum("lps,ps,s->lp", context.outer_table.values, scalar_fourier, outer.nu)

    projected = nodes.jacobian[..., None] * np.einsum("rsdi,rsi->rsd", nodes.basis, f2)
    tangential_fourier = np.einsum("rp,rsd->psd", test_phase, projected)
    tangential = 2.0 * np.einsum(
        "qdlps,psd,s->qlp", context.outer_table.alpha.conj(), tangential_fourier, outer.nu
    )

    row_l, row_j = layout.scalar
    tan_l, tan_j = layout.tangential
    return np.concatenate(
        [
            scalar[row_l, row_j + lmax],
            tangential[0][tan_l, tan_j + lmax],
            tangential[1][tan_l, tan_j + lmax],
        ]
    )


# ---------------------------------------------------------------------------
# System container and binary dump
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSystem:
    """Dense Galerkin matrix, right-hand side and the setup they belong to."""

    n: int
    nprime: Optional[int]
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    surface: Optional[ParametrizedSurface] = None
    medium: Optional[ElasticMedium] = None
    assembly_seconds: float = 0.0

    @property
    def layout(self) -> HarmonicLayout:
        return harmonic_layout(self.n)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def assemble_system(context: AssemblyContext, incident: IncidentField) -> BlockSystem:
    start = time.perf_counter()
    matrix = assemble_matrix(context)
    rhs = assemble_rhs(context, incident)
    return BlockSystem(
        n=context.n,
        nprime=context.nprime,
        matrix=matrix,
        rhs=rhs,
        surface=context.surface,
        medium=context.medium,
        assembly_seconds=time.perf_counter() - start,
    )


def dump_system(system: BlockSystem, path: str | Path) -> Path:
    """Write ``rows, cols`` (int64), then A column-major, then b, as float64 (re, im) pairs."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = system.matrix.shape
    with path.open("wb") as handle:
        np.asarray([rows, cols], dtype="<i8").tofile(handle)
        np.asarray(system.matrix.T.reshape(-1), dtype="<c16").tofile(handle)
        np.asarray(system.rhs, dtype="<c16").tofile(handle)
    logger.debug("Dumped %dx%d system to %s", rows, cols, path)
    return path


def load_system(path: str | Path) -> BlockSystem:
    """Read a file written by :func:`dump_system`.

    The format stores neither n' nor the setup, so ``nprime``, ``surface`` and
    ``medium`` are left unset; n is recovered from the dimension.
    """

    path = Path(path)
    with path.open("rb") as handle:
        rows, cols = np.fromfile(handle, dtype="<i8", count=2)
        matrix = np.fromfile(handle, dtype="<c16", count=rows * cols).reshape(cols, rows).T
        rhs = np.fromfile(handle, dtype="<c16", count=rows)
    n = int(round(np.sqrt((rows + 2) / 3.0))) - 1
    return BlockSystem(n=n, nprime=None, matrix=np.ascontiguousarray(matrix), rhs=rhs)


# ---------------------------------------------------------------------------
# Direct quadruple-sum oracle
# ---------------------------------------------------------------------------


def _direct_trial(context: AssemblyContext, latitude: _Latitude, trial: Tuple[int, ...]) -> np.ndarray:
    theta, phi = latitude.rotation.rotated_theta, latitude.rotation.rotated_phi
    if len(trial) == 2:
        return sph_harm(trial[0], trial[1], theta, phi)
    return z_basis(context.surface, trial[0], trial[1], trial[2], theta, phi)


def _inner_sum(context: AssemblyContext, kernel: np.ndarray, values: np.ndarray) -> np.ndarray:
    """sum_{r', s'} xi eta kernel * values for every outer longitude r."""

    weights = context.inner.mu * context.inner.nu
    return np.einsum("b,rab...->r...", weights, kernel * values)


def direct_block_entry(
    context: AssemblyContext, block: str, test: Tuple[int, ...], trial: Tuple[int, ...]
) -> complex:
    """One matrix entry by the literal sum over outer and inner nodes.

    ``test`` and ``trial`` are ``(l, j)`` for scalar harmonics and
    ``(l, j, k)`` for tangential ones.  ``block`` is one of ``K``, ``N``,
    ``H``, ``M``, ``S_p``, ``S_s``, ``I``, ``U``.
    """

    surface = context.surface
    outer = context.outer
    nodes = context.outer_nodes
    total = 0.0 + 0.0j

    for s in range(outer.n_theta):
        theta_s = np.full(outer.n_phi, outer.theta[s])
        phi = outer.phi
        weight = outer.mu * outer.nu[s]

        if block in ("I", "U"):
            jac = nodes.jacobian[:, s]
            if block == "I":
                values = sph_harm(*trial, theta_s, phi) * np.conj(sph_harm(*test, theta_s, phi))
            else:
                values = np.sum(
                    z_basis(surface, *trial, theta_s, phi) * np.conj(z_basis(surface, *test, theta_s, phi)),
                    axis=-1,
                )
            total += weight * np.sum(jac * values)
            continue

        latitude = _latitude(context, s, include_m=(block == "M"))
        kernels = latitude.kernels
        trial_values = _direct_trial(context, latitude, trial)

        if block in ("K", "S_p", "S_s"):
            weak, smooth = {
                "K": (kernels.k1, kernels.k2),
                "S_p": (kernels.s_p1, kernels.s_p2),
                "S_s": (kernels.s_s1, kernels.s_s2),
            }[block]
            inner = _inner_sum(context, _combine(latitude, weak, smooth), trial_values)
            test_values = np.conj(sph_harm(*test, theta_s, phi))
            total += weight * np.sum(inner * test_values)

        elif block == "N":
            kernel = _combine(latitude, kernels.s_s1, kernels.s_s2)
            inner = _inner_sum(context, kernel[..., None], trial_values)
            grad = grad_sph_harm(test[0], test[1], theta_s, phi)
            curl = np.cross(grad, unit_sphere_point(theta_s, phi))
            test_vector = np.conj(np.einsum("rij,rj->ri", dsq_matrix(surface, theta_s, phi), curl))
            total += weight * np.sum(inner * test_vector)

        elif block == "H":
            kernel = _combine(latitude, kernels.s_p1, kernels.s_p2)
            inner = _inner_sum(context, kernel, trial_values)
            _, z_t, z_p = z_basis_derivatives(surface, *test, theta_s, phi)
            t1, t2 = nodes.t1[:, s], nodes.t2[:, s]
            curl = (
                np.sum(t1 * np.conj(z_p), axis=-1) / np.sin(outer.theta[s])
                - np.sum(t2 * np.conj(z_t), axis=-1)
            )
            total += weight * np.sum(inner * curl)

        elif block == "M":
            kernel = _combine(latitude, kernels.m1, kernels.m2)
            applied = np.einsum("rabij,rabj->rabi", kernel, trial_values)
            inner = _inner_sum(context, applied, 1.0)
            test_vector = np.conj(z_basis(surface, *test, theta_s, phi))
            total += weight * np.sum(inner * test_vector)

        else:
            raise ValueError(f"Unknown block {block!r}.")

    return complex(total)


__all__ = [
    "BLOCK_NAMES",
    "OuterNodes",
    "AssemblyContext",
    "build_context",
    "assemble_k_block",
    "assemble_single_layer_block",
    "assemble_n_block",
    "assemble_h_block",
    "assemble_m_block",
    "assemble_identity_blocks",
    "assemble_matrix",
    "assemble_rhs",
    "BlockSystem",
    "assemble_system",
    "dump_system",
    "load_system",
    "direct_block_entry",
]
