"""Diagnostics: energy report, FA histograms, convergence harness and GDM surrogates."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import LINE_NODES, Discretisation, TimeGrid, l2_norm, tensor_eigenvalues
from .core import total_mass as _total_mass
from .cr import build_cr
from .errors import DiagnosticError, MeshTooLargeForDiagnostic
from .hmm import build_hmm
from .mesh import PolytopalMesh, generate_mesh
from .physics import fractional_anisotropy
from .solver import BoundaryCondition, SolverConfig, run_simulation

# ---------------------------------------------------------------------------
# energy and mass


def total_mass(d: Discretisation, v) -> float:
    """``int Pi_D v``."""
    return _total_mass(d, v)


def energy_report(d: Discretisation, result) -> tuple[float, float]:
    """``(sup_t ||Pi_D c(t)||_L2, ||grad_D c||_L2(Omega x (0, T)))``.

    The space-time gradient norm uses the piecewise-constant-in-time
    reconstruction, so step ``n`` contributes ``dt_n ||grad_D c^(n+1)||^2``.
    """
    states = result.states
    sup = max(l2_norm(d, v) for v in states)
    S = d.identity_stiffness()
    dts = result.grid.steps
    total = sum(dt * max(float(v @ (S @ v)), 0.0) for dt, v in zip(dts, states[1:]))
    return float(sup), float(math.sqrt(total))


# ---------------------------------------------------------------------------
# fractional anisotropy histogram


@dataclass(frozen=True)
class FaHistogram:
    edges: np.ndarray
    values: np.ndarray
    counts: np.ndarray

    @property
    def max_fa(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([f"{lo:.6f}", f"{hi:.6f}", int(c)])
        return buf.getvalue()


def cell_fa(mesh: PolytopalMesh, A_field, t: float = 0.0) -> np.ndarray:
    """FA of ``A(x_K)`` for every cell."""
    A = np.asarray(A_field(mesh.cell_centres, t) if callable(A_field) else A_field, dtype=float)
    if A.shape == (2, 2):
        A = np.broadcast_to(A, (mesh.n_cells, 2, 2))
    lam = tensor_eigenvalues(A)
    fa = fractional_anisotropy(lam[:, 0], lam[:, 1])
    # round-off can push an isotropic tensor's FA a hair above zero
    return np.clip(np.where(fa < 1e-14, 0.0, fa), 0.0, 1.0)


def fa_histogram(mesh: PolytopalMesh, A_field, nbins: int = 20) -> FaHistogram:
    if nbins < 1:
        raise ValueError("nbins must be >= 1")
    fa = cell_fa(mesh, A_field)
    counts, edges = np.histogram(fa, bins=nbins, range=(0.0, 1.0))
    return FaHistogram(edges, fa, counts)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution with the source that makes it solve ``c_t - div(A grad c) = s``."""
    name: str
    exact: Callable  # (x, y, t)
    grad: Callable  # (x, y, t) -> (gx, gy)
    source: Callable | None  # (x, y, t)
    half_width: float = 1.0
    dirichlet: bool = False
    A: np.ndarray = field(default_factory=lambda: np.eye(2))

    def boundary(self) -> BoundaryCondition:
        if self.dirichlet:
            return BoundaryCondition.dirichlet(self.exact)
        return BoundaryCondition.neumann()

    def initial(self, x, y):
        return self.exact(x, y, 0.0)


def heat_solution(L: float = 1.0) -> ManufacturedSolution:
    """``e^{-t} cos(pi x / L) cos(pi y / L)``: zero normal flux on ``[-L, L]^2``."""
    k = math.pi / L

    def exact(x, y, t):
        return np.exp(-t) * np.cos(k * x) * np.cos(k * y)

    def grad(x, y, t):
        e = np.exp(-t)
        return (-k * e * np.sin(k * x) * np.cos(k * y), -k * e * np.cos(k * x) * np.sin(k * y))

    def source(x, y, t):
        return (2 * k * k - 1.0) * exact(x, y, t)

    return ManufacturedSolution("heat", exact, grad, source, L)


def dirichlet_quadratic(L: float = 1.0) -> ManufacturedSolution:
    """``e^{-t} (x^2 + y^2)`` with its own trace as Dirichlet data."""

    def exact(x, y, t):
        return np.exp(-t) * (np.asarray(x) ** 2 + np.asarray(y) ** 2)

    def grad(x, y, t):
        e = np.exp(-t)
        return 2 * e * np.asarray(x), 2 * e * np.asarray(y)

    def source(x, y, t):
        return -exact(x, y, t) - 4.0 * np.exp(-t)

    return ManufacturedSolution("dirichlet-quadratic", exact, grad, source, L, dirichlet=True)


def constant_solution(value: float = 0.7, L: float = 1.0) -> ManufacturedSolution:
    def exact(x, y, t):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))

    def grad(x, y, t):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z

    return ManufacturedSolution("constant", exact, grad, None, L)


SOLUTIONS = {
    "heat": heat_solution,
    "dirichlet": dirichlet_quadratic,
    "constant": constant_solution,
}


# ---------------------------------------------------------------------------
# errors and convergence


def l2_error(d: Discretisation, v, exact: Callable, t: float) -> float:
    """``||Pi_D v - c(., t)||_L2`` with the scheme's error rule (cell centres for HMM)."""
    pts, w, P, _, _ = d.error_rule()
    diff = P @ v - exact(pts[:, 0], pts[:, 1], t)
    return float(math.sqrt(max(np.sum(w * diff * diff), 0.0)))


def gradient_error_sq(d: Discretisation, v, grad: Callable, t: float) -> float:
    pts, w, _, Gx, Gy = d.error_rule()
    gx, gy = grad(pts[:, 0], pts[:, 1], t)
    ex = Gx @ v - gx
    ey = Gy @ v - gy
    return float(np.sum(w * (ex * ex + ey * ey)))


@dataclass(frozen=True)
class ConvergenceLevel:
    h: float
    n_cells: int
    ndof: int
    dt: float
    l2_error: float
    grad_error: float


def _orders(h, e):
    h = np.asarray(h)
    e = np.asarray(e)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


@dataclass
class ConvergenceReport:
    """Errors per level, ordered by decreasing mesh size.

    The L2 error is taken at the final time; the gradient error is the
    ``L2(Omega x (0, T))`` norm.  Both use squared (root-sum-square) norms.
    """
    scheme: str
    mesh_kind: str
    solution: str
    levels: list

    @property
    def h(self) -> np.ndarray:
        return np.array([lv.h for lv in self.levels])

    @property
    def l2_errors(self) -> np.ndarray:
        return np.array([lv.l2_error for lv in self.levels])

    @property
    def grad_errors(self) -> np.ndarray:
        return np.array([lv.grad_error for lv in self.levels])

    @property
    def l2_orders(self) -> np.ndarray:
        return _orders(self.h, self.l2_errors)

    @property
    def grad_orders(self) -> np.ndarray:
        return _orders(self.h, self.grad_errors)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "n_cells", "ndof", "dt", "l2_error", "grad_error",
                    "l2_order", "grad_order"])
        lo, go = self.l2_orders, self.grad_orders
        for i, lv in enumerate(self.levels):
            a = f"{lo[i - 1]:.4f}" if i else ""
            b = f"{go[i - 1]:.4f}" if i else ""
            w.writerow([i, f"{lv.h:.6e}", lv.n_cells, lv.ndof, f"{lv.dt:.6e}",
                        f"{lv.l2_error:.6e}", f"{lv.grad_error:.6e}", a, b])
        return buf.getvalue()


def _discretisation(scheme: str, mesh: PolytopalMesh) -> Discretisation:
    if scheme == "hmm":
        return build_hmm(mesh)
    if scheme == "cr":
        return build_cr(mesh)
    raise ValueError(f"unknown scheme {scheme!r}")


def convergence_study(scheme: str = "hmm", solution: ManufacturedSolution | None = None,
                      levels: int = 4, mesh_kind: str | None = None, base_n: int = 8,
                      T: float = 0.5, base_steps: int = 2,
                      cfg: SolverConfig | None = None) -> ConvergenceReport:
    """Run the scheme on nested meshes with ``dt`` proportional to ``h^2``.

    Level ``l`` uses ``base_n * 2^l`` cells per side and ``base_steps * 4^l``
    time steps.  The manufactured source is added to the discrete load.
    """
    solution = solution or heat_solution()
    mesh_kind = mesh_kind or ("triangular" if scheme == "cr" else "rectangular")
    cfg = cfg or SolverConfig()
    out = []
    dirichlet = solution.boundary()
    for lvl in range(levels):
        n = base_n * 2 ** lvl
        mesh = generate_mesh(mesh_kind, solution.half_width, n)
        d = _discretisation(scheme, mesh)
        grid = TimeGrid.uniform(T, T / (base_steps * 4 ** lvl))
        res = run_simulation(d, solution.initial, dirichlet, solution.A, None, grid, cfg,
                             source=solution.source)
        t = grid.instants
        e_final = l2_error(d, res.final, solution.exact, grid.final_time)
        g2 = sum(float(t[i + 1] - t[i]) * gradient_error_sq(d, res.states[i + 1],
                                                             solution.grad, float(t[i + 1]))
                 for i in range(grid.n_steps))
        out.append(ConvergenceLevel(mesh.h, mesh.n_cells, d.ndof, grid.dt_max, e_final,
                                    math.sqrt(g2)))
    return ConvergenceReport(scheme, mesh_kind, solution.name, out)


# ---------------------------------------------------------------------------
# consistency and limit-conformity surrogates

DIAGNOSTIC_CAP = 1000


def _quadratic_form(d: Discretisation, free):
    _, w, P, Gx, Gy = _diag_rule(d)
    W = sp.diags(w)
    Q = (P.T @ W @ P + Gx.T @ W @ Gx + Gy.T @ W @ Gy).tocsc()
    return Q[free][:, free]


def _diag_rule(d: Discretisation):
    q = d.quadrature
    P, Gx, Gy = d.reconstruction
    return q.points, q.weights, P, Gx, Gy


def _free_dofs(d: Discretisation, space: str):
    if space == "neumann":
        return np.arange(d.ndof)
    if space == "dirichlet":
        return d.interior_dofs
    raise DiagnosticError(f"unknown space {space!r}; use 'neumann' or 'dirichlet'")


def _check_size(d: Discretisation, max_unknowns: int | None):
    cap = DIAGNOSTIC_CAP if max_unknowns is None else max_unknowns
    if d.ndof > cap:
        raise MeshTooLargeForDiagnostic(
            f"{d.ndof} unknowns exceed the diagnostic cap of {cap}; raise max_unknowns to force")


def consistency_surrogate(d: Discretisation, phi: Callable, grad_phi: Callable,
                          space: str = "neumann", max_unknowns: int | None = None,
                          return_minimiser: bool = False):
    """``min_w sqrt(||Pi_D w - phi||^2 + ||grad_D w - grad phi||^2)`` by normal equations.

    This lies within a factor ``sqrt(2)`` of the sum-of-norms quantity.
    """
    _check_size(d, max_unknowns)
    free = _free_dofs(d, space)
    pts, w, P, Gx, Gy = _diag_rule(d)
    x, y = pts[:, 0], pts[:, 1]
    f = np.broadcast_to(np.asarray(phi(x, y), float), x.shape)
    gx, gy = (np.broadcast_to(np.asarray(g, float), x.shape) for g in grad_phi(x, y))
    b = P.T @ (w * f) + Gx.T @ (w * gx) + Gy.T @ (w * gy)
    sol = np.zeros(d.ndof)
    sol[free] = spla.spsolve(_quadratic_form(d, free), b[free])
    rv = P @ sol - f
    rx = Gx @ sol - gx
    ry = Gy @ sol - gy
    val = float(math.sqrt(np.sum(w * (rv * rv + rx * rx + ry * ry))))
    return (val, sol) if return_minimiser else val


def sum_of_norms(d: Discretisation, v, phi: Callable, grad_phi: Callable) -> float:
    """``||Pi_D v - phi|| + ||grad_D v - grad phi||`` (the non-quadratic objective)."""
    pts, w, P, Gx, Gy = _diag_rule(d)
    x, y = pts[:, 0], pts[:, 1]
    f = np.broadcast_to(np.asarray(phi(x, y), float), x.shape)
    gx, gy = (np.broadcast_to(np.asarray(g, float), x.shape) for g in grad_phi(x, y))
    rv = P @ v - f
    rx = Gx @ v - gx
    ry = Gy @ v - gy
    return float(math.sqrt(np.sum(w * rv * rv)) + math.sqrt(np.sum(w * (rx * rx + ry * ry))))


def _boundary_normal_flux(mesh: PolytopalMesh, psi: Callable) -> float:
    bf = mesh.boundary_faces
    a = mesh.vertices[mesh.face_vertices[bf, 0]]
    b = mesh.vertices[mesh.face_vertices[bf, 1]]
    # outward normal of each boundary face from its single cell
    cf = np.flatnonzero(np.isin(mesh.cell_face_idx, bf))
    normal = np.empty((mesh.n_faces, 2))
    normal[mesh.cell_face_idx[cf]] = mesh.cf_normal[cf]
    n = normal[bf]
    worst = 0.0
    for s in LINE_NODES:
        p = a + s * (b - a)
        px, py = psi(p[:, 0], p[:, 1])
        flux = np.broadcast_to(px, len(p)) * n[:, 0] + np.broadcast_to(py, len(p)) * n[:, 1]
        worst = max(worst, float(np.abs(flux).max()))
    return worst


def conformity_surrogate(d: Discretisation, psi: Callable, div_psi: Callable,
                         space: str = "neumann", max_unknowns: int | None = None,
                         tol: float = 1e-10) -> float:
    """Norm of ``w -> int grad_D w . psi + Pi_D w div psi`` against ``||Pi_D w||^2 + ||grad_D w||^2``.

    For the Neumann space ``psi . n`` must vanish on the boundary, otherwise
    the defect does not tend to zero and the input is rejected.
    """
    _check_size(d, max_unknowns)
    free = _free_dofs(d, space)
    if space == "neumann":
        flux = _boundary_normal_flux(d.mesh, psi)
        if flux > tol:
            raise DiagnosticError(f"psi . n = {flux:.3e} on the boundary; Neumann diagnostics "
                                  "need psi . n = 0")
    pts, w, P, Gx, Gy = _diag_rule(d)
    x, y = pts[:, 0], pts[:, 1]
    px, py = (np.broadcast_to(np.asarray(g, float), x.shape) for g in psi(x, y))
    dv = np.broadcast_to(np.asarray(div_psi(x, y), float), x.shape)
    ell = (Gx.T @ (w * px) + Gy.T @ (w * py) + P.T @ (w * dv))[free]
    z = spla.spsolve(_quadratic_form(d, free), ell)
    return float(math.sqrt(max(float(ell @ z), 0.0)))


def gdm_diagnostics(d: Discretisation, phi: Callable, grad_phi: Callable, psi: Callable,
                    div_psi: Callable, space: str = "neumann",
                    max_unknowns: int | None = None) -> tuple[float, float]:
    """``(S_D, W_D)`` surrogates for one test pair; each is within ``sqrt(2)`` of the
    sum-of-norms definition."""
    return (consistency_surrogate(d, phi, grad_phi, space, max_unknowns),
            conformity_surrogate(d, psi, div_psi, space, max_unknowns))
