"""Tests comparing the fast assembly chains with the direct quadruple sum."""

import numpy as np
import pytest

from elastic_scattering.utils.assembly import (
    assemble_h_block,
    assemble_identity_blocks,
    assemble_k_block,
    assemble_m_block,
    assemble_matrix,
    assemble_n_block,
    assemble_system,
    build_context,
    direct_block_entry,
    dump_system,
    load_system,
)
from elastic_scattering.utils.fields import IncidenceKind, IncidentField
from elastic_scattering.utils.geometry import bean, ellipsoid, sphere
from elastic_scattering.utils.kernels import ElasticMedium
from elastic_scattering.utils.rotation import rotated_grid
from elastic_scattering.utils.solver import harmonic_layout

N = 4
SCALAR_PROBES = [(0, 0), (1, -1), (2, 1), (3, -3), (4, 2)]
TANGENTIAL_PROBES = [(1, 0), (2, -2), (3, 1), (4, -4), (4, 3)]


@pytest.fixture(scope="module")
def bean_context():
    return build_context(bean(), ElasticMedium(np.pi), N)


def _scalar(l, j):
    return l * l + l + j


def _tangential(l, j):
    return l * l + l + j - 1


def _assert_entries_agree(block, pairs, direct):
    scale = np.max(np.abs(block))
    for (row, col), value in zip(pairs, direct):
        assert abs(block[row, col] - value) <= 1e-10 * scale


def test_k_block_matches_direct_sum(bean_context):
    """Chain and direct evaluation of K agree on the bean."""

    block = assemble_k_block(bean_context)
    probes = [(test, trial) for test in SCALAR_PROBES for trial in SCALAR_PROBES[::2]]

    direct = [direct_block_entry(bean_context, "K", test, trial) for test, trial in probes]

    _assert_entries_agree(block, [(_scalar(*test), _scalar(*trial)) for test, trial in probes], direct)


@pytest.mark.parametrize("k", [1, 2])
def test_n_block_matches_direct_sum(bean_context, k):
    """N^{(k)} couples scalar tests to tangential trials."""

    block = assemble_n_block(bean_context, k)
    probes = [(test, trial) for test in SCALAR_PROBES[1::2] + [(0, 0)] for trial in TANGENTIAL_PROBES[:3]]

    direct = [direct_block_entry(bean_context, "N", test, trial + (k,)) for test, trial in probes]

    _assert_entries_agree(block, [(_scalar(*test), _tangential(*trial)) for test, trial in probes], direct)


@pytest.mark.parametrize("k", [1, 2])
def test_h_block_matches_direct_sum(bean_context, k):
    """H^{(k')} couples tangential tests to scalar trials."""

    block = assemble_h_block(bean_context, k)
    probes = [(test, trial) for test in TANGENTIAL_PROBES[:3] for trial in SCALAR_PROBES[1::2] + [(0, 0)]]

    direct = [direct_block_entry(bean_context, "H", test + (k,), trial) for test, trial in probes]

    _assert_entries_agree(block, [(_tangential(*test), _scalar(*trial)) for test, trial in probes], direct)


@pytest.mark.parametrize("k_test,k_trial", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_m_block_matches_direct_sum(bean_context, k_test, k_trial):
    """Each M^{(k', k)} block agrees with the direct sum."""

    block = assemble_m_block(bean_context, k_test, k_trial)
    probes = [(test, trial) for test in TANGENTIAL_PROBES[:3] for trial in TANGENTIAL_PROBES[2:]]

    direct = [direct_block_entry(bean_context, "M", test + (k_test,), trial + (k_trial,)) for test, trial in probes]

    _assert_entries_agree(block, [(_tangential(*test), _tangential(*trial)) for test, trial in probes], direct)


def test_identity_blocks_match_direct_sum(bean_context):
    """The Jacobian-weighted Gram matrices agree with the direct sum."""

    identity, gram = assemble_identity_blocks(bean_context)

    for test, trial in [((2, 1), (2, 1)), ((3, -1), (1, -1)), ((4, 0), (0, 0))]:
        value = direct_block_entry(bean_context, "I", test, trial)
        assert identity[_scalar(*test), _scalar(*trial)] == pytest.approx(value, abs=1e-12)
    for test, trial in [((2, 1, 1), (2, 1, 2)), ((3, -1, 2), (1, -1, 2))]:
        value = direct_block_entry(bean_context, "U", test, trial)
        assert gram[(test[2], trial[2])][_tangential(*test[:2]), _tangential(*trial[:2])] == pytest.approx(value, abs=1e-12)


def test_identity_blocks_are_identity_on_sphere():
    """With J = 1 the bases are orthonormal: I = U^{kk} = identity and U^{12} = 0."""

    context = build_context(sphere(), ElasticMedium(1.0), 3)
    identity, gram = assemble_identity_blocks(context)
    layout = harmonic_layout(3)

    np.testing.assert_allclose(identity, np.eye(layout.ny), atol=1e-13)
    np.testing.assert_allclose(gram[(1, 1)], np.eye(layout.nz), atol=1e-13)
    np.testing.assert_allclose(gram[(2, 2)], np.eye(layout.nz), atol=1e-13)
    np.testing.assert_allclose(gram[(1, 2)], 0.0, atol=1e-13)
    np.testing.assert_allclose(gram[(2, 1)], 0.0, atol=1e-13)


def test_threaded_assembly_matches_serial():
    """Latitudes summed by the thread pool give the same matrix."""

    medium = ElasticMedium(np.pi)
    serial = assemble_matrix(build_context(bean(), medium, 2))
    threaded = assemble_matrix(build_context(bean(), medium, 2, threads=3))

    np.testing.assert_allclose(threaded, serial, atol=1e-13)


def test_system_shapes_and_binary_round_trip(tmp_path):
    """A and b have the layout dimension and survive the binary dump."""

    medium = ElasticMedium(np.pi)
    incident = IncidentField(IncidenceKind.POINT_SOURCE, medium, source=(0.0, 0.05, 0.0866))
    system = assemble_system(build_context(bean(), medium, 2), incident)

    path = dump_system(system, tmp_path / "system.bin")
    loaded = load_system(path)

    assert system.matrix.shape == (system.dimension, system.dimension)
    assert system.dimension == harmonic_layout(2).dimension == 25
    assert system.rhs.shape == (25,)
    assert path.stat().st_size == 16 + 16 * (25 * 25 + 25)
    assert loaded.n == 2
    assert loaded.nprime is None
    np.testing.assert_array_equal(loaded.matrix, system.matrix)
    np.testing.assert_array_equal(loaded.rhs, system.rhs)


def test_context_validates_degrees():
    """n >= 1 and n' >= n + 1 are required."""

    with pytest.raises(ValueError, match="at least 1"):
        build_context(sphere(), ElasticMedium(1.0), 0)
    with pytest.raises(ValueError, match="at least n\\+1"):
        build_context(sphere(), ElasticMedium(1.0), 3, nprime=3)


@pytest.mark.parametrize("n,nprime,tolerance", [(5, 20, 1e-6), (3, 10, 1e-3)])
def test_assembly_with_rotated_nodes_on_the_poles(n, nprime, tolerance):
    """Inner rules whose rotated nodes land on a pole assemble and agree with the next inner order."""

    medium = ElasticMedium(np.pi)
    incident = IncidentField(IncidenceKind.POINT_SOURCE, medium, source=(0.0, 0.05, 0.0866))
    context = build_context(ellipsoid(), medium, n, nprime)
    frames = rotated_grid(context.outer, context.inner)

    system = assemble_system(context, incident)
    neighbour = assemble_system(build_context(ellipsoid(), medium, n, nprime + 1), incident)

    assert min(np.min(np.abs(np.sin(frame.rotated_theta))) for frame in frames) < 1e-12
    assert np.all(np.isfinite(system.matrix))
    scale = np.max(np.abs(neighbour.matrix))
    np.testing.assert_allclose(system.matrix, neighbour.matrix, atol=tolerance * scale, rtol=0)
