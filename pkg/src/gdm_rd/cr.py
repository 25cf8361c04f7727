"""Crouzeix-Raviart (non-conforming P1) gradient discretisation on triangles.

One unknown per face.  On each triangle the basis function attached to face
``sigma`` is the affine ``e_K^sigma`` equal to 1 at the midpoint of ``sigma``
and 0 at the two other edge midpoints; ``Pi_D`` is the broken P1 function and
``grad_D`` its broken gradient.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .core import Discretisation, QuadratureRule, face_average
from .errors import NonSimplicialMesh
from .mesh import PolytopalMesh


class CrDiscretisation(Discretisation):
    name = "cr"

    def __init__(self, mesh: PolytopalMesh):
        if not mesh.is_simplicial:
            raise NonSimplicialMesh("Crouzeix-Raviart needs a mesh of triangles")
        super().__init__(mesh)
        self.ndof = mesh.n_faces
        self.boundary_dofs = mesh.boundary_faces.copy()
        self.cell_dofs = mesh.cell_face_idx.reshape(-1, 3)
        mids = mesh.face_centroid[self.cell_dofs]  # (nc, 3, 2)
        V = np.concatenate([np.ones((mesh.n_cells, 3, 1)), mids], axis=2)
        # coef[k, :, j] = (a, bx, by) of e_K^{sigma_j}
        self.coef = np.linalg.inv(V)

    @property
    def basis_gradients(self) -> np.ndarray:
        """``(nc, 3, 2)``: gradient of each local basis function."""
        return np.transpose(self.coef[:, 1:, :], (0, 2, 1))

    def basis_values(self, k: int, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.column_stack([np.ones(len(p)), p]) @ self.coef[k]

    def value_matrix(self, rule: QuadratureRule) -> sp.csr_matrix:
        k = rule.cell
        X = np.column_stack([np.ones(rule.size), rule.points])
        vals = np.einsum("qi,qij->qj", X, self.coef[k])
        rows = np.repeat(np.arange(rule.size), 3)
        return sp.csr_matrix((vals.ravel(), (rows, self.cell_dofs[k].ravel())),
                             shape=(rule.size, self.ndof))

    def gradient_matrices(self, rule: QuadratureRule):
        k = rule.cell
        g = self.basis_gradients[k]
        rows = np.repeat(np.arange(rule.size), 3)
        cols = self.cell_dofs[k].ravel()
        shape = (rule.size, self.ndof)
        return (sp.csr_matrix((g[:, :, 0].ravel(), (rows, cols)), shape=shape),
                sp.csr_matrix((g[:, :, 1].ravel(), (rows, cols)), shape=shape))

    def mass(self) -> sp.csr_matrix:
        return self._mass

    @cached_property
    def _mass(self):
        # edge-midpoint rule, exact for the quadratic products e^sigma e^sigma'
        diag = np.bincount(self.cell_dofs.ravel(),
                           weights=np.repeat(self.mesh.cell_measure / 3.0, 3),
                           minlength=self.ndof)
        return sp.diags(diag).tocsr()

    def local_stiffness(self, k: int, A_K) -> np.ndarray:
        g = self.basis_gradients[k]
        return self.mesh.cell_measure[k] * g @ np.asarray(A_K, float) @ g.T

    def stiffness(self, A_cells: np.ndarray) -> sp.csr_matrix:
        g = self.basis_gradients
        S = self.mesh.cell_measure[:, None, None] * np.einsum("kia,kab,kjb->kij", g, A_cells, g)
        rows = np.repeat(self.cell_dofs, 3, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, 3)).ravel()
        M = sp.coo_matrix((S.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)).tocsr()
        M.sum_duplicates()
        return M

    def interpolate(self, f) -> np.ndarray:
        return face_average(self.mesh, f)

    def cell_values(self, v):
        return np.asarray(v)[self.cell_dofs].mean(axis=1)


def build_cr(mesh: PolytopalMesh) -> CrDiscretisation:
    return CrDiscretisation(mesh)
