"""P1 meshes of an interval and of the unit disc, with bulk and surface operators.

The boundary unknowns are the bulk boundary nodes, so the trace map is a
plain selection and rho_Gamma = rho|_Gamma holds by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh.  ``boundary`` lists boundary nodes in cycle order (2D)
    or the two endpoints (1D)."""

    dim: int
    nodes: np.ndarray        # (n_nodes, dim)
    elements: np.ndarray     # (n_elements, dim + 1)
    boundary: np.ndarray     # ordered boundary node indices

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary.size

    @property
    def boundary_is_cycle(self) -> bool:
        return self.dim == 2

    def element_measures(self) -> np.ndarray:
        p = self.nodes[self.elements]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def volume(self) -> float:
        return float(np.sum(self.element_measures()))

    def boundary_edge_lengths(self) -> np.ndarray:
        if self.dim == 1:
            return np.zeros(0)
        b = self.nodes[self.boundary]
        return np.linalg.norm(np.roll(b, -1, axis=0) - b, axis=1)

    @property
    def perimeter(self) -> float:
        if self.dim == 1:
            return 2.0  # counting measure of the two endpoints
        return float(np.sum(self.boundary_edge_lengths()))

    def edges(self) -> np.ndarray:
        """Unique undirected edges (2D)."""
        t = self.elements
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        if self.dim == 1:
            return self.n_nodes - self.elements.shape[0]
        return self.n_nodes - self.edges().shape[0] + self.elements.shape[0]


def build_interval_mesh(n: int, length: float = 1.0) -> Mesh:
    """n equal elements on [0, length]."""
    if n < 2:
        raise MeshError("interval mesh needs n >= 2 elements")
    if length <= 0:
        raise MeshError("length must be positive")
    x = np.linspace(0.0, length, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(1, x[:, None], elements, np.array([0, n]))


def _boundary_edges(elements: np.ndarray) -> np.ndarray:
    e = np.vstack([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq[counts == 1]


def build_disc_mesh(levels: int) -> Mesh:
    """Unit disc: a hexagon refined ``levels`` times by edge bisection, with
    each new boundary midpoint pushed radially onto the unit circle."""
    if not 0 <= levels <= 7:
        raise MeshError("disc mesh supports 0 <= levels <= 7")
    ang = np.arange(6) * np.pi / 3.0
    nodes = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    tris = np.array([[0, 1 + k, 1 + (k + 1) % 6] for k in range(6)])

    for _ in range(levels):
        bnd = {tuple(e) for e in _boundary_edges(tris)}
        mid: dict = {}
        new_nodes = list(nodes)

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                m = 0.5 * (nodes[i] + nodes[j])
                if key in bnd:
                    m = m / np.linalg.norm(m)
                mid[key] = len(new_nodes)
                new_nodes.append(m)
            return mid[key]

        children = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            children += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        nodes = np.asarray(new_nodes)
        tris = np.asarray(children)

    bnodes = np.unique(_boundary_edges(tris))
    theta = np.arctan2(nodes[bnodes, 1], nodes[bnodes, 0])
    boundary = bnodes[np.argsort(theta)]
    mesh = Mesh(2, nodes, tris, boundary)
    if np.any(mesh.element_measures() <= 0):
        raise MeshError("disc refinement produced a non-positive element")
    return mesh


def relabel(mesh: Mesh, perm: np.ndarray) -> Mesh:
    """Same mesh with node k of the result equal to node perm[k] of ``mesh``."""
    perm = np.asarray(perm)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(perm.size)
    return Mesh(mesh.dim, mesh.nodes[perm], inverse[mesh.elements], inverse[mesh.boundary])


@dataclass(frozen=True)
class Operators:
    """Assembled P1 matrices.  Surface matrices act on boundary vectors in the
    order of ``mesh.boundary``."""

    mesh: Mesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    ML: np.ndarray
    MG: sp.csr_matrix
    KG: sp.csr_matrix
    MGL: np.ndarray
    T: sp.csr_matrix      # trace: (n_boundary, n_nodes) selection

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    @property
    def nb(self) -> int:
        return self.mesh.n_boundary

    def inject(self, w: np.ndarray) -> np.ndarray:
        """Extend a boundary vector by zero into the bulk."""
        return self.T.T @ w

    @cached_property
    def coupled_mass(self) -> sp.csr_matrix:
        """M + T^T M_Gamma T."""
        return (self.M + self.T.T @ self.MG @ self.T).tocsr()

    @cached_property
    def coupled_stiffness(self) -> sp.csr_matrix:
        """K + T^T K_Gamma T."""
        return (self.K + self.T.T @ self.KG @ self.T).tocsr()

    @cached_property
    def coupled_lumped(self) -> np.ndarray:
        lumped = self.ML.copy()
        lumped[self.mesh.boundary] += self.MGL
        return lumped


def _assemble_1d(nodes, elements):
    h = nodes[elements[:, 1], 0] - nodes[elements[:, 0], 0]
    if np.any(h <= 0):
        raise MeshError("degenerate element in 1D assembly")
    me = h[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    ke = (1.0 / h)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return me, ke


def _assemble_2d(nodes, elements):
    p = nodes[elements]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
    det = np.linalg.det(jac)
    if np.any(det <= 1e-14):
        raise MeshError("degenerate or inverted triangle in assembly")
    area = 0.5 * det
    ref = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    grads = np.linalg.solve(np.transpose(jac, (0, 2, 1)), np.broadcast_to(ref, (len(det), 2, 3)))
    ke = area[:, None, None] * np.einsum("eki,ekj->eij", grads, grads)
    me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return me, ke


def _scatter(elements, local, n):
    k = elements.shape[1]
    rows = np.repeat(elements, k, axis=1).ravel()
    cols = np.tile(elements, (1, k)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble(mesh: Mesh) -> Operators:
    n = mesh.n_nodes
    if mesh.dim == 1:
        me, ke = _assemble_1d(mesh.nodes, mesh.elements)
    else:
        me, ke = _assemble_2d(mesh.nodes, mesh.elements)
    M = _scatter(mesh.elements, me, n)
    K = _scatter(mesh.elements, ke, n)
    # symmetrize away round-off from the element loop
    M = ((M + M.T) * 0.5).tocsr()
    K = ((K + K.T) * 0.5).tocsr()

    nb = mesh.n_boundary
    if mesh.dim == 1:
        MG = sp.identity(nb, format="csr")
        KG = sp.csr_matrix((nb, nb))
    else:
        lens = mesh.boundary_edge_lengths()
        if np.any(lens <= 0):
            raise MeshError("degenerate boundary edge")
        edges = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb])
        mge = lens[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        kge = (1.0 / lens)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
        MG = _scatter(edges, mge, nb)
        KG = _scatter(edges, kge, nb)
    T = sp.csr_matrix((np.ones(nb), (np.arange(nb), mesh.boundary)), shape=(nb, n))
    return Operators(mesh, M, K, np.asarray(M.sum(axis=1)).ravel(), MG, KG,
                     np.asarray(MG.sum(axis=1)).ravel(), T)


def trace(ops: Operators, v: np.ndarray) -> np.ndarray:
    """Boundary values of a bulk vector, in boundary-cycle order."""
    v = np.asarray(v)
    if v.shape[0] != ops.n:
        raise ValueError(f"trace: expected {ops.n} bulk entries, got {v.shape[0]}")
    return v[ops.mesh.boundary]
