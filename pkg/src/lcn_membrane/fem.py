"""P1 assembly of the regularized discrete energy, its derivatives and the H1 metric.

Degrees of freedom are node-major: the three components of vertex ``k``
occupy positions ``3k, 3k+1, 3k+2`` of the global vector.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateElementError, InvalidInitializerError
from .material import density_in_metric, metric_components


@dataclass
class Deformation:
    """Continuous piecewise-linear map from the mesh into R^3."""

    mesh: object
    dofs: np.ndarray

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=float).ravel()
        if self.dofs.shape[0] != 3 * self.mesh.n_vertices:
            raise ValueError(
                "expected %d dofs, got %d" % (3 * self.mesh.n_vertices, self.dofs.shape[0])
            )

    @property
    def nodal(self):
        """View of the dofs as a ``(V, 3)`` array."""
        return self.dofs.reshape(-1, 3)

    def copy(self):
        return Deformation(self.mesh, self.dofs.copy())


@dataclass(frozen=True)
class EnergyBreakdown:
    stretch: float
    regularization: float

    @property
    def total(self):
        return self.stretch + self.regularization


def _as_dofs(y):
    return y.dofs if isinstance(y, Deformation) else np.asarray(y, dtype=float).ravel()


def element_gradients(mesh, dofs):
    """Constant deformation gradient on each triangle, shape ``(T, 3, 2)``."""
    Y = np.asarray(dofs, dtype=float).reshape(-1, 3)[mesh.triangles]  # (T, 3 nodes, 3 comps)
    return np.einsum("tki,tka->tia", Y, mesh.grad_basis)


def grad_per_element(y):
    return element_gradients(y.mesh, y.dofs)


def edge_weights(mesh, c_r, crease_aware):
    """Per-edge regularization weight: min of the adjacent elements' ``c_r``."""
    c_r = np.asarray(c_r, dtype=float)
    w = np.minimum(c_r[mesh.edge_left], c_r[mesh.edge_right])
    if crease_aware:
        w = np.where(mesh.crease_edge, 0.0, w)
    return w


def _scalar_h1(mesh):
    """Scalar P1 mass + stiffness matrix, ``(V, V)`` CSR."""
    A = mesh.areas
    G = mesh.grad_basis
    stiff = A[:, None, None] * np.einsum("tka,tla->tkl", G, G)
    mass = A[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    V = mesh.n_vertices
    return sp.csr_matrix(((mass + stiff).ravel(), (rows, cols)), shape=(V, V))


def h1_matrix(mesh):
    """Gram matrix of ``(u, v) -> int u.v + grad u : grad v`` on vector P1."""
    return sp.kron(_scalar_h1(mesh), sp.identity(3), format="csr")


def _scalar_regularization(mesh, weights):
    """Scalar matrix ``S`` with ``R = 1/2 sum_i y_i^T S y_i`` over components."""
    L, Rt = mesh.edge_left, mesh.edge_right
    keep = weights > 0
    V = mesh.n_vertices
    if not np.any(keep):
        return sp.csr_matrix((V, V))
    L, Rt, w = L[keep], Rt[keep], weights[keep]
    nodes = np.concatenate([mesh.triangles[L], mesh.triangles[Rt]], axis=1)  # (E, 6)
    coef = np.concatenate([mesh.grad_basis[L], -mesh.grad_basis[Rt]], axis=1)  # (E, 6, 2)
    scale = 2.0 * w * mesh.h_max * mesh.edge_length[keep]
    local = scale[:, None, None] * np.einsum("eka,ela->ekl", coef, coef)
    rows = np.repeat(nodes, 6, axis=1).ravel()
    cols = np.tile(nodes, (1, 6)).ravel()
    S = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(V, V))
    S.sum_duplicates()
    return S


class DiscreteEnergy:
    """Stretching energy plus jump-penalty regularization on a fixed mesh.

    Holds the constant pieces (regularization matrix, H1 Gram matrix and a
    shared sparsity pattern) so Newton iterations only re-evaluate the
    stretching part.
    """

    def __init__(self, mesh, material, crease_aware=False):
        if material.n_elements != mesh.n_triangles:
            raise ValueError("material has %d elements, mesh %d" % (material.n_elements, mesh.n_triangles))
        self.mesh = mesh
        self.material = material
        self.crease_aware = bool(crease_aware)
        self.weights = edge_weights(mesh, material.c_r, crease_aware)
        tri = mesh.triangles
        self._eldofs = (3 * tri[:, :, None] + np.arange(3)).reshape(-1, 9)
        self.reg_matrix = sp.kron(
            _scalar_regularization(mesh, self.weights), sp.identity(3), format="csr"
        )
        self.h1 = h1_matrix(mesh)
        self._build_pattern()

    # -- sparsity bookkeeping -------------------------------------------------
    def _build_pattern(self):
        N = self.mesh.n_dofs
        r = np.repeat(self._eldofs, 9, axis=1).ravel()
        c = np.tile(self._eldofs, (1, 9)).ravel()
        R = self.reg_matrix.tocoo()
        rows = np.concatenate([r, R.row])
        cols = np.concatenate([c, R.col])
        P = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(N, N))
        P.sum_duplicates()
        P.sort_indices()
        self.indptr = P.indptr
        self.indices = P.indices
        row_of = np.repeat(np.arange(N), np.diff(P.indptr))
        self._keys = row_of.astype(np.int64) * N + P.indices
        self.nnz = P.nnz
        pos = self._positions(r, c)
        # sums element stiffness entries into the pattern: data = A @ K.ravel()
        self._assembler = sp.csr_matrix(
            (np.ones(pos.size), (pos, np.arange(pos.size))), shape=(self.nnz, pos.size)
        )
        self.reg_data = self._align(self.reg_matrix)
        self.h1_data = self._align(self.h1)

    def _positions(self, rows, cols):
        N = self.mesh.n_dofs
        return np.searchsorted(self._keys, rows.astype(np.int64) * N + cols)

    def _align(self, A):
        A = A.tocoo()
        out = np.zeros(self.nnz)
        np.add.at(out, self._positions(A.row, A.col), A.data)
        return out

    def matrix_from_data(self, data):
        N = self.mesh.n_dofs
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(N, N))

    # -- evaluation -----------------------------------------------------------
    def _local(self, dofs, order):
        """Element energies and, up to ``order``, element gradients and stiffnesses."""
        mesh, mat = self.mesh, self.material
        F = element_gradients(mesh, dofs)
        try:
            out = density_in_metric(*metric_components(F), mat.m, mat.s, mat.s0, order=order)
        except DegenerateElementError as err:
            raise DegenerateElementError(
                "degenerate element %d: det(F^T F) = %.3e" % (err.element, err.value),
                value=err.value,
                element=err.element,
            ) from None
        if order == 0:
            return F, out
        A = mesh.areas
        G0 = mesh.grad_basis[:, :, 0]
        G1 = mesh.grad_basis[:, :, 1]
        F1 = F[:, :, 0]
        F2 = F[:, :, 1]
        T = F.shape[0]
        # d(c11, c22, c12) / d(element dofs), dofs ordered node-major
        Rd = np.empty((T, 3, 3, 3))
        Rd[:, 0] = 2.0 * G0[:, :, None] * F1[:, None, :]
        Rd[:, 1] = 2.0 * G1[:, :, None] * F2[:, None, :]
        Rd[:, 2] = G0[:, :, None] * F2[:, None, :] + G1[:, :, None] * F1[:, None, :]
        Rd = Rd.reshape(T, 3, 9)
        g = out[1]
        ge = A[:, None] * np.einsum("tc,tck->tk", g, Rd)
        if order == 1:
            return F, (out[0], ge)
        K = np.swapaxes(Rd, 1, 2) @ (out[2] @ Rd)
        g11, g22, g12 = g[:, 0, None, None], g[:, 1, None, None], g[:, 2, None, None]
        S = (
            2.0 * g11 * G0[:, :, None] * G0[:, None, :]
            + 2.0 * g22 * G1[:, :, None] * G1[:, None, :]
            + g12 * (G0[:, :, None] * G1[:, None, :] + G1[:, :, None] * G0[:, None, :])
        )
        K4 = K.reshape(T, 3, 3, 3, 3)
        for i in range(3):
            K4[:, :, i, :, i] += S
        K *= A[:, None, None]
        return F, (out[0], ge, K)

    def breakdown(self, y):
        dofs = _as_dofs(y)
        F, (W,) = self._local(dofs, 0)
        stretch = float(np.dot(self.mesh.areas, W))
        return EnergyBreakdown(stretch, self.regularization(dofs, F))

    def regularization(self, y, F=None):
        dofs = _as_dofs(y)
        if F is None:
            F = element_gradients(self.mesh, dofs)
        jump = F[self.mesh.edge_left] - F[self.mesh.edge_right]
        per_edge = self.weights * self.mesh.edge_length * np.einsum("eia,eia->e", jump, jump)
        return float(self.mesh.h_max * per_edge.sum())

    def total(self, y):
        return self.breakdown(y).total

    def _scatter_vector(self, elem):
        return np.bincount(self._eldofs.ravel(), weights=elem.ravel(), minlength=self.mesh.n_dofs)

    def _scatter_matrix(self, K):
        return self._assembler @ K.ravel()

    def gradient(self, y):
        dofs = _as_dofs(y)
        _, (_, ge) = self._local(dofs, 1)
        return self._scatter_vector(ge) + self.reg_matrix @ dofs

    def hessian_data(self, y):
        """Hessian values aligned with the shared sparsity pattern."""
        dofs = _as_dofs(y)
        _, (_, _, K) = self._local(dofs, 2)
        return self._scatter_matrix(K) + self.reg_data

    def hessian(self, y):
        return self.matrix_from_data(self.hessian_data(y))

    def evaluate(self, y):
        """Energy breakdown, gradient and Hessian data in one pass."""
        dofs = _as_dofs(y)
        F, (W, ge, K) = self._local(dofs, 2)
        bd = EnergyBreakdown(float(np.dot(self.mesh.areas, W)), self.regularization(dofs, F))
        grad = self._scatter_vector(ge) + self.reg_matrix @ dofs
        hdata = self._scatter_matrix(K) + self.reg_data
        return bd, grad, hdata


def assemble_energy(y, material, crease_aware=False):
    return DiscreteEnergy(y.mesh, material, crease_aware).breakdown(y)


def assemble_gradient(y, material, crease_aware=False):
    return DiscreteEnergy(y.mesh, material, crease_aware).gradient(y)


def assemble_hessian(y, material, crease_aware=False):
    return DiscreteEnergy(y.mesh, material, crease_aware).hessian(y)


def interpolate(f, mesh):
    """Lagrange interpolant of ``f(x1, x2) -> (y1, y2, y3)`` (vectorized in x)."""
    x1 = mesh.vertices[:, 0]
    x2 = mesh.vertices[:, 1]
    vals = np.column_stack([np.broadcast_to(np.asarray(c, float), x1.shape) for c in f(x1, x2)])
    if vals.shape != (mesh.n_vertices, 3):
        raise InvalidInitializerError("initializer must return three components")
    if not np.all(np.isfinite(vals)):
        raise InvalidInitializerError("initializer produced non-finite values")
    return Deformation(mesh, vals.ravel())


def metric_deviation(y, material):
    """``sum_T |T| * |F_T^T F_T - g_T|`` with the Frobenius norm pointwise."""
    F = grad_per_element(y)
    I = np.einsum("tia,tib->tab", F, F)
    D = I - material.g
    return float(np.dot(y.mesh.areas, np.sqrt(np.einsum("tab,tab->t", D, D))))


def h1_norm_sq(mesh, v, h1=None):
    v = _as_dofs(v)
    if h1 is None:
        h1 = h1_matrix(mesh)
    return float(v @ (h1 @ v))
