import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st

from chs_dynbc.discretization import (MeshError, assemble, build_disc_mesh, build_interval_mesh,
                                      relabel, trace)


@pytest.fixture(scope="module")
def disc3():
    return assemble(build_disc_mesh(3))


def test_interval_nodes_and_boundary():
    mesh = build_interval_mesh(2, 1.0)
    np.testing.assert_array_equal(mesh.nodes[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(mesh.boundary, [0, 2])


@pytest.mark.parametrize("n", [2, 5, 64])
def test_interval_surface_stiffness_is_zero(n):
    ops = assemble(build_interval_mesh(n))
    assert ops.KG.nnz == 0 or np.all(ops.KG.toarray() == 0)
    np.testing.assert_array_equal(ops.MG.toarray(), np.eye(2))


def test_interval_volume():
    ops = assemble(build_interval_mesh(4, 2.0))
    assert ops.M.sum() == pytest.approx(2.0, rel=1e-12)


def test_interval_rejects_small_n():
    with pytest.raises(MeshError):
        build_interval_mesh(1)


def test_two_element_stiffness_by_hand():
    ops = assemble(build_interval_mesh(2, 1.0))
    expected = np.array([[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]])
    np.testing.assert_allclose(ops.K.toarray(), expected, atol=1e-14)
    # dense formula K_ij = sum_e h_e^{-1} (+-1)
    h = 0.5
    dense = np.zeros((3, 3))
    for e in range(2):
        for i, si in ((e, -1), (e + 1, 1)):
            for j, sj in ((e, -1), (e + 1, 1)):
                dense[i, j] += si * sj / h
    np.testing.assert_allclose(ops.K.toarray(), dense, atol=1e-14)
    np.testing.assert_allclose(ops.M.toarray(),
                               h / 6 * np.array([[2, 1, 0], [1, 4, 1], [0, 1, 2]]), atol=1e-15)


@pytest.mark.parametrize("levels", range(0, 6))
def test_disc_euler_characteristic_and_positive_areas(levels):
    mesh = build_disc_mesh(levels)
    assert mesh.euler_characteristic() == 1
    assert np.all(mesh.element_measures() > 0)
    assert sorted(mesh.boundary.tolist()) == sorted(set(mesh.boundary.tolist()))
    np.testing.assert_allclose(np.linalg.norm(mesh.nodes[mesh.boundary], axis=1), 1.0)


def test_disc_area_and_perimeter_level3(disc3):
    nb = disc3.nb
    assert abs(disc3.M.sum() - math.pi) / math.pi < 0.02
    assert abs(disc3.MG.sum() - 2 * math.pi) / (2 * math.pi) < 0.01
    # boundary nodes are equally spaced, so the polygon is regular with nb sides
    assert disc3.MG.sum() == pytest.approx(2 * nb * math.sin(math.pi / nb), rel=1e-12)
    assert disc3.M.sum() == pytest.approx(disc3.mesh.volume, rel=1e-12)


def test_disc_rejects_large_levels():
    with pytest.raises(MeshError):
        build_disc_mesh(8)


@pytest.mark.parametrize("make", [lambda: build_interval_mesh(17, 1.3), lambda: build_disc_mesh(3)])
def test_operator_invariants(make):
    ops = assemble(make())
    one, oneb = np.ones(ops.n), np.ones(ops.nb)
    np.testing.assert_allclose(ops.K @ one, 0.0, atol=1e-12)
    np.testing.assert_allclose(ops.KG @ oneb, 0.0, atol=1e-12)
    for A in (ops.M, ops.K, ops.MG, ops.KG):
        assert abs(A - A.T).max() <= 1e-12 if A.nnz else True
    assert ops.M.min() >= 0
    assert np.all(ops.ML > 0) and np.all(ops.MGL > 0)
    assert one @ (ops.M @ one) == pytest.approx(ops.mesh.volume, rel=1e-10)
    assert oneb @ (ops.MG @ oneb) == pytest.approx(ops.mesh.perimeter, rel=1e-10)
    assert np.linalg.eigvalsh(ops.M.toarray()).min() > 0
    assert np.linalg.eigvalsh(ops.K.toarray()).min() > -1e-10
    off = ops.K.toarray() - np.diag(ops.K.diagonal())
    assert off.max() <= 1e-12   # M-matrix sign pattern


def test_trace_examples(disc3):
    np.testing.assert_array_equal(trace(disc3, np.full(disc3.n, 3.5)), np.full(disc3.nb, 3.5))
    ops1 = assemble(build_interval_mesh(6))
    v = np.arange(7.0)
    np.testing.assert_array_equal(trace(ops1, v), [0.0, 6.0])
    x = disc3.mesh.nodes[:, 0]
    theta = np.arctan2(disc3.mesh.nodes[disc3.mesh.boundary, 1], x[disc3.mesh.boundary])
    np.testing.assert_allclose(trace(disc3, x), np.cos(theta), atol=1e-12)
    assert np.all(np.diff(theta) > 0)
    with pytest.raises(ValueError):
        trace(disc3, np.zeros(disc3.n + 1))


@given(st.lists(st.floats(-1e3, 1e3), min_size=48, max_size=48))
def test_trace_after_injection_is_identity(values):
    ops = assemble(build_disc_mesh(2))
    w = np.array(values[: ops.nb])
    np.testing.assert_array_equal(trace(ops, ops.inject(w)), w)


def test_surface_spectrum_on_unit_circle():
    ops = assemble(build_disc_mesh(4))
    evals = sla.eigh(ops.KG.toarray(), ops.MG.toarray(), eigvals_only=True)
    assert abs(evals[0]) < 1e-10
    # eigenvalues of -d^2/dtheta^2 are k^2 with multiplicity two
    np.testing.assert_allclose(evals[1:7], [1, 1, 4, 4, 9, 9], rtol=0.05)


def _smallest_bulk_eigenvalue(ops):
    """Power iteration on the shifted operator sigma*I - M^{-1}K restricted away from constants."""
    Minv = spla.factorized(ops.M.tocsc())
    lam_max = spla.eigsh(ops.K, k=1, M=ops.M, which="LA", return_eigenvectors=False)[0]
    sigma = lam_max * 1.01
    one = np.ones(ops.n)
    v = np.random.default_rng(0).normal(size=ops.n)
    for _ in range(4000):
        v = v - (one @ (ops.M @ v)) / (one @ (ops.M @ one)) * one
        w = sigma * v - Minv(ops.K @ v)
        v = w / np.linalg.norm(w)
    return (v @ (ops.K @ v)) / (v @ (ops.M @ v))


def test_bulk_galerkin_consistency_between_levels():
    lam3 = _smallest_bulk_eigenvalue(assemble(build_disc_mesh(3)))
    lam4 = _smallest_bulk_eigenvalue(assemble(build_disc_mesh(4)))
    assert abs(lam3 - lam4) / lam4 < 0.05
    # first nonzero Neumann eigenvalue of the unit disc: (j'_{1,1})^2
    assert lam4 == pytest.approx(1.8412 ** 2, rel=0.05)


def test_relabel_preserves_operators():
    mesh = build_disc_mesh(2)
    perm = np.random.default_rng(5).permutation(mesh.n_nodes)
    a, b = assemble(mesh), assemble(relabel(mesh, perm))
    np.testing.assert_allclose(b.M.toarray(), a.M.toarray()[np.ix_(perm, perm)], atol=1e-15)
    np.testing.assert_allclose(b.K.toarray(), a.K.toarray()[np.ix_(perm, perm)], atol=1e-13)
    np.testing.assert_allclose(b.MG.toarray(), a.MG.toarray(), atol=1e-15)


def test_degenerate_element_detected():
    mesh = build_interval_mesh(3)
    bad = type(mesh)(1, mesh.nodes[[0, 1, 1, 3]], mesh.elements, mesh.boundary)
    with pytest.raises(MeshError):
        assemble(bad)
