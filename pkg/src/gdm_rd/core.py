"""Gradient discretisation machinery shared by the concrete schemes.

A gradient discretisation bundles a space of discrete unknowns with a
function reconstruction ``Pi_D``, a gradient reconstruction ``grad_D``, an
interpolant ``J_D`` for initial data and a time grid.  Concrete schemes
(:mod:`gdm_rd.hmm`, :mod:`gdm_rd.cr`) subclass :class:`Discretisation` and
expose both reconstructions as sparse evaluation matrices at quadrature
points, from which everything else (mass, loads, error norms) is assembled.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import NonPositiveTensor, NonSymmetricTensor, OutOfRangeTime, QuadratureFailure
from .mesh import PolytopalMesh

# Degree-5 seven-point symmetric rule on the reference triangle (barycentric, weights sum to 1).
_A1, _B1, _W1 = 0.059715871789769820, 0.470142064105115090, 0.132394152788506181
_A2, _B2, _W2 = 0.797426985353087322, 0.101286507323456339, 0.125939180544827153
TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI_WEIGHTS = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
LINE_NODES = 0.5 * (_GL_X + 1.0)
LINE_WEIGHTS = 0.5 * _GL_W


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on ``Omega`` with the owning cell and sub-triangle.

    Each cell is cut into the triangles ``(x_K, a_sigma, b_sigma)`` over its
    faces; these are exactly the half-diamonds ``D_{K,sigma}``.  ``subcell``
    indexes the mesh's CSR cell-face arrays.
    """
    points: np.ndarray
    weights: np.ndarray
    cell: np.ndarray
    subcell: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


def cell_quadrature(mesh: PolytopalMesh) -> QuadratureRule:
    fv = mesh.face_vertices[mesh.cell_face_idx]
    xk = mesh.cell_centres[mesh.cf_cell]
    a = mesh.vertices[fv[:, 0]]
    b = mesh.vertices[fv[:, 1]]
    area = 0.5 * np.abs((a[:, 0] - xk[:, 0]) * (b[:, 1] - xk[:, 1])
                        - (b[:, 0] - xk[:, 0]) * (a[:, 1] - xk[:, 1]))
    pts = (TRI_BARY[None, :, 0, None] * xk[:, None, :]
           + TRI_BARY[None, :, 1, None] * a[:, None, :]
           + TRI_BARY[None, :, 2, None] * b[:, None, :])
    nq = len(TRI_WEIGHTS)
    return QuadratureRule(pts.reshape(-1, 2),
                          (area[:, None] * TRI_WEIGHTS[None, :]).ravel(),
                          np.repeat(mesh.cf_cell, nq),
                          np.repeat(np.arange(len(xk)), nq))


def face_average(mesh: PolytopalMesh, f, faces=None) -> np.ndarray:
    """``(1/|sigma|) int_sigma f ds`` for the given faces (4-point Gauss)."""
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    a = mesh.vertices[mesh.face_vertices[faces, 0]]
    b = mesh.vertices[mesh.face_vertices[faces, 1]]
    pts = a[:, None, :] + LINE_NODES[None, :, None] * (b - a)[:, None, :]
    vals = _evaluate(f, pts.reshape(-1, 2)).reshape(len(faces), -1)
    return vals @ LINE_WEIGHTS


def _evaluate(f, pts):
    vals = np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float), (len(pts),))
    if not np.all(np.isfinite(vals)):
        raise QuadratureFailure("integrand returned non-finite values")
    return vals


def integrate(mesh: PolytopalMesh, f, rule: QuadratureRule | None = None) -> np.ndarray:
    """Per-cell integrals of ``f(x, y)``."""
    rule = cell_quadrature(mesh) if rule is None else rule
    vals = _evaluate(f, rule.points)
    return np.bincount(rule.cell, weights=rule.weights * vals, minlength=mesh.n_cells)


# ---------------------------------------------------------------------------
# tensors


def cell_tensors(mesh: PolytopalMesh, A, t: float = 0.0, check: bool = True) -> np.ndarray:
    """Sample a diffusion tensor at the cell centres.

    ``A`` may be a 2x2 array (constant), an ``(n_cells, 2, 2)`` array, or a
    callable ``A(points, t)`` returning ``(n, 2, 2)``.
    """
    if callable(A):
        T = np.asarray(A(mesh.cell_centres, t), dtype=float)
    else:
        T = np.asarray(A, dtype=float)
    if T.shape == (2, 2):
        T = np.broadcast_to(T, (mesh.n_cells, 2, 2))
    if T.shape != (mesh.n_cells, 2, 2):
        raise ValueError(f"tensor field has shape {T.shape}, expected ({mesh.n_cells}, 2, 2)")
    if check:
        check_spd(T)
    return np.ascontiguousarray(T)


def check_spd(T: np.ndarray, rtol: float = 1e-12) -> None:
    T = np.asarray(T).reshape(-1, 2, 2)
    scale = np.abs(T).max(axis=(1, 2))
    if np.any(np.abs(T[:, 0, 1] - T[:, 1, 0]) > rtol * np.maximum(scale, 1e-300)):
        raise NonSymmetricTensor("diffusion tensor is not symmetric")
    lam_min = tensor_eigenvalues(T)[:, 1]
    if np.any(~np.isfinite(lam_min)) or np.any(lam_min <= 0.0):
        raise NonPositiveTensor("diffusion tensor is not positive definite")


def tensor_eigenvalues(T: np.ndarray) -> np.ndarray:
    """Eigenvalues ``(lambda_1 >= lambda_2)`` of symmetric 2x2 tensors."""
    T = np.asarray(T, dtype=float)
    a, b, d = T[..., 0, 0], 0.5 * (T[..., 0, 1] + T[..., 1, 0]), T[..., 1, 1]
    m = 0.5 * (a + d)
    r = np.hypot(0.5 * (a - d), b)
    return np.stack([m + r, m - r], axis=-1)


# ---------------------------------------------------------------------------
# time


@dataclass(frozen=True)
class TimeGrid:
    instants: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.instants, dtype=float)
        if t.ndim != 1 or len(t) < 1 or t[0] != 0.0:
            raise ValueError("time grid must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time instants must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "instants", t)

    @classmethod
    def uniform(cls, T: float, dt: float) -> "TimeGrid":
        if T < 0 or dt <= 0:
            raise ValueError("need T >= 0 and dt > 0")
        n = int(np.ceil(T / dt - 1e-9)) if T > 0 else 0
        if n == 0:
            return cls(np.zeros(1))
        return cls(np.arange(n + 1) * (T / n))

    @property
    def final_time(self) -> float:
        return float(self.instants[-1])

    @property
    def n_steps(self) -> int:
        return len(self.instants) - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.instants)

    @property
    def dt_max(self) -> float:
        return float(self.steps.max()) if self.n_steps else 0.0

    def index_at(self, t: float, tol: float | None = None) -> int:
        """Index ``n`` with ``c(t) = c^{(n)}``: 0 at ``t = 0``, else ``n`` such
        that ``t`` lies in ``(t^{(n-1)}, t^{(n)}]``."""
        T = self.final_time
        tol = 1e-12 * max(T, 1.0) if tol is None else tol
        if t < -tol or t > T + tol:
            raise OutOfRangeTime(f"t = {t} outside [0, {T}]")
        near = int(np.argmin(np.abs(self.instants - t)))
        if abs(self.instants[near] - t) <= tol:
            return near
        return int(np.searchsorted(self.instants, t, side="left"))


@dataclass
class SpaceTimeDofs:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or len(self.values) != len(self.grid.instants):
            raise ValueError("need one DofVector per time instant")


def time_reconstruction(s: SpaceTimeDofs, t: float) -> np.ndarray:
    """Piecewise-constant-in-time reconstruction, continuous from the left."""
    return s.values[s.grid.index_at(t)]


def delta_derivative(s: SpaceTimeDofs, n: int) -> np.ndarray:
    """Unknowns of the discrete time derivative ``(c^{(n+1)} - c^{(n)}) / dt``;
    apply ``Pi_D`` to evaluate it."""
    if not 0 <= n < s.grid.n_steps:
        raise OutOfRangeTime(f"step {n} outside [0, {s.grid.n_steps})")
    return (s.values[n + 1] - s.values[n]) / s.grid.steps[n]


# ---------------------------------------------------------------------------
# discretisation contract


class Discretisation:
    """Base class of a gradient discretisation on a polytopal mesh.

    Subclasses set ``ndof`` and ``boundary_dofs`` and implement
    :meth:`value_matrix`, :meth:`gradient_matrices`, :meth:`mass`,
    :meth:`stiffness` and :meth:`interpolate`.
    """

    name = "abstract"
    ndof: int
    boundary_dofs: np.ndarray

    def __init__(self, mesh: PolytopalMesh):
        self.mesh = mesh

    @cached_property
    def quadrature(self) -> QuadratureRule:
        return cell_quadrature(self.mesh)

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    @cached_property
    def reconstruction(self):
        """``(P, Gx, Gy)``: ``Pi_D`` and ``grad_D`` evaluated at :attr:`quadrature`."""
        P = self.value_matrix(self.quadrature)
        Gx, Gy = self.gradient_matrices(self.quadrature)
        return P, Gx, Gy

    def value_matrix(self, rule: QuadratureRule) -> sp.csr_matrix:
        raise NotImplementedError

    def gradient_matrices(self, rule: QuadratureRule):
        raise NotImplementedError

    def mass(self) -> sp.csr_matrix:
        raise NotImplementedError

    def stiffness(self, A_cells: np.ndarray) -> sp.csr_matrix:
        raise NotImplementedError

    def interpolate(self, f) -> np.ndarray:
        raise NotImplementedError

    def cell_values(self, v: np.ndarray) -> np.ndarray:
        """Cell averages of ``Pi_D v``."""
        P = self.reconstruction[0]
        w = self.quadrature.weights
        return np.bincount(self.quadrature.cell, weights=w * (P @ v),
                           minlength=self.mesh.n_cells) / self.mesh.cell_measure

    def reaction_rule(self):
        """``(weights, P)`` used to integrate ``F(Pi_D c) Pi_D phi``."""
        return self.quadrature.weights, self.reconstruction[0]

    def error_rule(self):
        """``(points, weights, P, Gx, Gy)`` used by discrete error norms."""
        P, Gx, Gy = self.reconstruction
        return self.quadrature.points, self.quadrature.weights, P, Gx, Gy

    def load(self, f, t: float | None = None) -> np.ndarray:
        """Vector ``(int f Pi_D e_i)_i`` for a source ``f(x, y)`` or ``f(x, y, t)``."""
        q = self.quadrature
        g = f if t is None else (lambda x, y: f(x, y, t))
        vals = _evaluate(g, q.points)
        return self.reconstruction[0].T @ (q.weights * vals)

    def boundary_interpolate(self, g, t: float | None = None) -> np.ndarray:
        """Face averages of the trace ``g`` on the boundary unknowns."""
        gg = g if t is None else (lambda x, y: g(x, y, t))
        return face_average(self.mesh, gg, self.boundary_faces_of_dofs)

    @property
    def boundary_faces_of_dofs(self) -> np.ndarray:
        return self.mesh.boundary_faces

    def identity_stiffness(self) -> sp.csr_matrix:
        return self._identity_stiffness

    @cached_property
    def _identity_stiffness(self):
        return self.stiffness(np.broadcast_to(np.eye(2), (self.mesh.n_cells, 2, 2)))


def assemble_mass(d: Discretisation) -> sp.csr_matrix:
    return d.mass()


def assemble_stiffness(d: Discretisation, A, t: float = 0.0) -> sp.csr_matrix:
    return d.stiffness(cell_tensors(d.mesh, A, t))


def interpolate_initial(d: Discretisation, f) -> np.ndarray:
    return d.interpolate(f)


def discrete_norm(d: Discretisation, v) -> float:
    """``||Pi_D v||_{L2} + ||grad_D v||_{L2}`` (sum, not root-sum-square)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d.ndof,):
        raise ValueError(f"vector has shape {v.shape}, expected ({d.ndof},)")
    m = float(v @ (d.mass() @ v))
    s = float(v @ (d.identity_stiffness() @ v))
    return np.sqrt(max(m, 0.0)) + np.sqrt(max(s, 0.0))


def total_mass(d: Discretisation, v) -> float:
    """``int Pi_D v``."""
    return float(np.ones(d.ndof) @ (d.mass() @ np.asarray(v, dtype=float)))


def l2_norm(d: Discretisation, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(v @ (d.mass() @ v), 0.0)))
