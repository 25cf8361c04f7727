"""Hybrid mimetic mixed (HMM) gradient discretisation.

Unknowns are one value per cell followed by one value per face.  On a cell
``K`` the consistent gradient is

    grad_K phi = (1/|K|) sum_sigma |sigma| phi_sigma n_{K,sigma}

and the stabilisation residual is

    R_K(phi)_sigma = phi_sigma - phi_K - grad_K phi . (xbar_sigma - x_K).

The reconstructed gradient on the half-diamond ``D_{K,sigma}`` is
``grad_K phi + sqrt(2)/d_{K,sigma} R_K(phi)_sigma n_{K,sigma}`` and the cell
bilinear form is ``|K| A grad_K c . grad_K phi + R_K(phi)^T B_K R_K(c)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .core import Discretisation, QuadratureRule, cell_tensors, check_spd, integrate
from .mesh import PolytopalMesh

STABILIZATIONS = ("mean_eigenvalue", "gradient")


@dataclass(frozen=True)
class _Batch:
    """Cells sharing the same number of faces, with stacked local operators."""
    cells: np.ndarray  # (m,)
    cf: np.ndarray  # (m, nK) CSR positions
    dofs: np.ndarray  # (m, 1 + nK)
    grad: np.ndarray  # (m, 2, 1 + nK)
    resid: np.ndarray  # (m, nK, 1 + nK)
    weight: np.ndarray  # (m, nK)  |sigma| / d_{K,sigma}
    normals: np.ndarray  # (m, nK, 2)


class HmmDiscretisation(Discretisation):
    """HMM scheme on an arbitrary polytopal mesh.

    Parameters
    ----------
    mesh : PolytopalMesh
    stabilization : {"mean_eigenvalue", "gradient"}
        Rule for ``B_K = diag(b_sigma)``.  Both start from the unit
        stabilisation ``|D_{K,sigma}| * 2 / d_{K,sigma}^2 = |sigma| / d_{K,sigma}``;
        ``"mean_eigenvalue"`` multiplies it by ``tr(A_K) / 2``, ``"gradient"`` by
        ``n^T A_K n``, which makes the cell form equal
        ``int_K A grad_D c . grad_D phi`` exactly.
    """

    name = "hmm"

    def __init__(self, mesh: PolytopalMesh, stabilization: str = "mean_eigenvalue"):
        if stabilization not in STABILIZATIONS:
            raise ValueError(f"unknown stabilization {stabilization!r}")
        super().__init__(mesh)
        self.stabilization = stabilization
        self.n_cells = mesh.n_cells
        self.ndof = mesh.n_cells + mesh.n_faces
        self.boundary_dofs = mesh.n_cells + mesh.boundary_faces
        self.half_diamond = 0.5 * mesh.face_measure[mesh.cell_face_idx] * mesh.cf_dist
        self._batches = self._build_batches()

    def face_dof(self, f):
        return self.n_cells + np.asarray(f)

    def _build_batches(self):
        m = self.mesh
        nfk = m.faces_per_cell
        batches = []
        for nk in np.unique(nfk):
            cells = np.flatnonzero(nfk == nk)
            cf = m.cell_ptr[cells][:, None] + np.arange(nk)[None, :]
            faces = m.cell_face_idx[cf]
            area = m.cell_measure[cells]
            normals = m.cf_normal[cf]
            length = m.face_measure[faces]
            dofs = np.concatenate([cells[:, None], self.n_cells + faces], axis=1)
            grad = np.zeros((len(cells), 2, nk + 1))
            grad[:, :, 1:] = np.transpose(length[:, :, None] * normals, (0, 2, 1)) / area[:, None, None]
            offset = m.face_centroid[faces] - m.cell_centres[cells][:, None, :]
            resid = -np.einsum("msi,mij->msj", offset, grad)
            resid[:, :, 0] -= 1.0
            resid[:, :, 1:] += np.eye(nk)[None]
            batches.append(_Batch(cells, cf, dofs, grad, resid,
                                  length / m.cf_dist[cf], normals))
        return batches

    # local operators -------------------------------------------------------

    def _locate(self, k):
        nk = int(self.mesh.faces_per_cell[k])
        for b in self._batches:
            if b.grad.shape[2] == nk + 1:
                i = int(np.searchsorted(b.cells, k))
                return b, i
        raise IndexError(k)

    def local_dofs(self, k: int) -> np.ndarray:
        b, i = self._locate(k)
        return b.dofs[i]

    def cell_gradient_operator(self, k: int) -> np.ndarray:
        """``(2, 1 + nK)`` matrix of ``grad_K`` acting on ``(phi_K, phi_sigma)``."""
        b, i = self._locate(k)
        return b.grad[i]

    def residual_operator(self, k: int) -> np.ndarray:
        b, i = self._locate(k)
        return b.resid[i]

    def _stab_weights(self, b: _Batch, A):
        if self.stabilization == "mean_eigenvalue":
            return b.weight * (0.5 * np.trace(A, axis1=1, axis2=2))[:, None]
        return b.weight * np.einsum("msi,mij,msj->ms", b.normals, A, b.normals)

    def stabilization_matrix(self, k: int, A_K) -> np.ndarray:
        b, i = self._locate(k)
        sub = _Batch(b.cells[i:i + 1], b.cf[i:i + 1], b.dofs[i:i + 1], b.grad[i:i + 1],
                     b.resid[i:i + 1], b.weight[i:i + 1], b.normals[i:i + 1])
        return np.diag(self._stab_weights(sub, np.asarray(A_K, float)[None])[0])

    def _local_matrices(self, b: _Batch, A):
        area = self.mesh.cell_measure[b.cells]
        cons = area[:, None, None] * np.einsum("mai,mab,mbj->mij", b.grad, A, b.grad)
        w = self._stab_weights(b, A)
        stab = np.einsum("msi,ms,msj->mij", b.resid, w, b.resid)
        return cons + stab

    def local_stiffness(self, k: int, A_K) -> np.ndarray:
        """Dense ``|K| grad_K^T A_K grad_K + R_K^T B_K R_K`` over ``(phi_K, phi_sigma)``."""
        A_K = np.asarray(A_K, dtype=float).reshape(1, 2, 2)
        check_spd(A_K)
        b, i = self._locate(k)
        sub = _Batch(b.cells[i:i + 1], b.cf[i:i + 1], b.dofs[i:i + 1], b.grad[i:i + 1],
                     b.resid[i:i + 1], b.weight[i:i + 1], b.normals[i:i + 1])
        return self._local_matrices(sub, A_K)[0]

    # global assembly -------------------------------------------------------

    def stiffness(self, A_cells: np.ndarray) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for b in self._batches:
            S = self._local_matrices(b, A_cells[b.cells])
            n = b.dofs.shape[1]
            rows.append(np.repeat(b.dofs, n, axis=1).ravel())
            cols.append(np.tile(b.dofs, (1, n)).ravel())
            vals.append(S.ravel())
        S = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.ndof, self.ndof)).tocsr()
        S.sum_duplicates()
        return S

    def mass(self) -> sp.csr_matrix:
        return self._mass

    @cached_property
    def _mass(self):
        diag = np.zeros(self.ndof)
        diag[:self.n_cells] = self.mesh.cell_measure
        return sp.diags(diag).tocsr()

    def interpolate(self, f) -> np.ndarray:
        v = np.zeros(self.ndof)
        v[:self.n_cells] = integrate(self.mesh, f, self.quadrature) / self.mesh.cell_measure
        return v

    def cell_values(self, v):
        return np.asarray(v)[:self.n_cells].copy()

    # reconstructions -------------------------------------------------------

    @cached_property
    def _cell_selector(self):
        nc = self.n_cells
        return sp.csr_matrix((np.ones(nc), (np.arange(nc), np.arange(nc))), shape=(nc, self.ndof))

    @cached_property
    def half_diamond_gradients(self):
        """Sparse ``(Gx, Gy)`` giving ``grad_D`` on every half-diamond (CSR order)."""
        rows, cols, vx, vy = [], [], [], []
        for b in self._batches:
            d = self.mesh.cf_dist[b.cf]
            # (m, nK, 2, 1 + nK)
            g = (b.grad[:, None, :, :]
                 + (np.sqrt(2.0) / d)[:, :, None, None] * b.normals[:, :, :, None] * b.resid[:, :, None, :])
            n = b.dofs.shape[1]
            rows.append(np.repeat(b.cf, n, axis=1).ravel())
            cols.append(np.repeat(b.dofs[:, None, :], b.cf.shape[1], axis=1).ravel())
            vx.append(g[:, :, 0, :].ravel())
            vy.append(g[:, :, 1, :].ravel())
        r, c = np.concatenate(rows), np.concatenate(cols)
        shape = (len(self.mesh.cell_face_idx), self.ndof)
        return (sp.csr_matrix((np.concatenate(vx), (r, c)), shape=shape),
                sp.csr_matrix((np.concatenate(vy), (r, c)), shape=shape))

    def value_matrix(self, rule: QuadratureRule) -> sp.csr_matrix:
        return self._cell_selector[rule.cell]

    def gradient_matrices(self, rule: QuadratureRule):
        Gx, Gy = self.half_diamond_gradients
        return Gx[rule.subcell], Gy[rule.subcell]

    def reaction_rule(self):
        return self.mesh.cell_measure, self._cell_selector

    def error_rule(self):
        m = self.mesh
        Gx, Gy = self.half_diamond_gradients
        return (m.cell_centres[m.cf_cell], self.half_diamond,
                self._cell_selector[m.cf_cell], Gx, Gy)


def build_hmm(mesh: PolytopalMesh, stabilization: str = "mean_eigenvalue") -> HmmDiscretisation:
    return HmmDiscretisation(mesh, stabilization)


def local_stiffness(hmm: HmmDiscretisation, k: int, A_K) -> np.ndarray:
    return hmm.local_stiffness(k, A_K)


# ---------------------------------------------------------------------------
# finite-volume form


@dataclass(frozen=True)
class FaceFluxSet:
    """Fluxes ``F_{K,sigma}`` in the mesh's CSR cell-face order."""
    mesh: PolytopalMesh
    values: np.ndarray

    def cell_flux_sum(self) -> np.ndarray:
        """``sum_sigma |sigma| F_{K,sigma}`` per cell."""
        m = self.mesh
        return np.bincount(m.cf_cell, weights=m.face_measure[m.cell_face_idx] * self.values,
                           minlength=m.n_cells)

    def face_sums(self) -> np.ndarray:
        """``F_{K,sigma} + F_{L,sigma}`` per face (single flux on boundary faces)."""
        return np.bincount(self.mesh.cell_face_idx, weights=self.values,
                           minlength=self.mesh.n_faces)

    def conservativity_defect(self) -> np.ndarray:
        return np.abs(self.face_sums()[self.mesh.interior_faces])

    def boundary_fluxes(self) -> np.ndarray:
        return self.face_sums()[self.mesh.boundary_faces]

    def bilinear_form(self, w) -> float:
        """``sum_K sum_sigma |sigma| F_{K,sigma} (w_K - w_sigma)``."""
        m = self.mesh
        w = np.asarray(w)
        diff = w[m.cf_cell] - w[m.n_cells + m.cell_face_idx]
        return float(np.sum(m.face_measure[m.cell_face_idx] * self.values * diff))


def face_fluxes(hmm: HmmDiscretisation, A, v) -> FaceFluxSet:
    """Fluxes defined by ``sum_sigma |sigma| F_{K,sigma}(v) (w_K - w_sigma) = a_K(v, w)``.

    Since constants lie in the kernel of each local matrix ``S_K``, the local
    form only sees ``w_K - w_sigma`` and ``|sigma| F_{K,sigma} = -(S_K v_K)_sigma``.
    """
    A_cells = cell_tensors(hmm.mesh, A)
    v = np.asarray(v, dtype=float)
    out = np.empty(len(hmm.mesh.cell_face_idx))
    for b in hmm._batches:
        S = hmm._local_matrices(b, A_cells[b.cells])
        Sv = np.einsum("mij,mj->mi", S, v[b.dofs])
        out[b.cf] = -Sv[:, 1:] / hmm.mesh.face_measure[hmm.mesh.cell_face_idx[b.cf]]
    return FaceFluxSet(hmm.mesh, out)


def cell_balance_residual(hmm: HmmDiscretisation, fluxes: FaceFluxSet, c, c_prev, dt,
                          cell_source=None) -> np.ndarray:
    """``|K| (c_K - c_K^prev) / dt + sum |sigma| F_{K,sigma} - cell_source_K``.

    ``cell_source`` is the cell row of the load, e.g. ``|K| F(c_K)``.
    """
    nc = hmm.n_cells
    m = hmm.mesh.cell_measure
    src = 0.0 if cell_source is None else np.asarray(cell_source)
    return (m * (np.asarray(c)[:nc] - np.asarray(c_prev)[:nc]) / dt
            + fluxes.cell_flux_sum() - src)
