"""Time stepping of the gradient scheme.

Each step solves, for all test unknowns ``phi`` of the free space,

    (M/dt)(c - c_prev) + S c = int F(Pi_D c*) Pi_D phi  [+ int s Pi_D phi]

where ``c* = c`` (implicit step, solved by Picard or Newton iteration) or
``c* = c_prev`` (IMEX step, one linear solve).  With Dirichlet data the
boundary unknowns are fixed to the face averages of ``g`` and only the
interior rows are solved.

Nonlinear iterations stop when the residual ``||r||_2 / |Omega|`` and the
discrete norm of the last update are both below ``nonlinear_tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (Discretisation, SpaceTimeDofs, TimeGrid, cell_tensors, discrete_norm, l2_norm,
                   total_mass)
from .errors import ConfigError, LinearSolveFailure, NonlinearDivergence, SolverError
from .physics import ReactionTerm

log = logging.getLogger(__name__)

STEPPERS = ("implicit", "imex")
NONLINEAR = ("newton", "picard")
LINEAR = ("auto", "direct", "cg")


@dataclass
class SolverConfig:
    stepper: str = "implicit"
    nonlinear: str = "newton"
    nonlinear_tol: float = 1e-10
    max_nonlinear_iters: int = 50
    linear: str = "auto"
    linear_tol: float = 1e-12
    clamp_reaction: bool = True
    # Picard iterations before switching to Newton; None keeps plain Picard
    picard_switch: int | None = 3
    direct_limit: int = 10_000

    def __post_init__(self):
        if self.stepper not in STEPPERS:
            raise ConfigError(f"unknown stepper {self.stepper!r}", "solver.stepper")
        if self.nonlinear not in NONLINEAR:
            raise ConfigError(f"unknown nonlinear method {self.nonlinear!r}", "solver.nonlinear")
        if self.linear not in LINEAR:
            raise ConfigError(f"unknown linear solver {self.linear!r}", "solver.linear")
        if self.nonlinear_tol <= 0 or self.linear_tol <= 0:
            raise ConfigError("tolerances must be positive", "solver")
        if self.max_nonlinear_iters < 1:
            raise ConfigError("need at least one nonlinear iteration", "solver.max_nonlinear_iters")
        if self.picard_switch is not None and self.picard_switch < 1:
            raise ConfigError("picard_switch must be >= 1 or None", "solver.picard_switch")


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str = "neumann"
    g: Callable | None = None  # g(x, y, t)

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet"):
            raise ConfigError(f"unknown boundary condition {self.kind!r}", "bc.kind")
        if self.kind == "dirichlet" and self.g is None:
            raise ConfigError("dirichlet condition needs boundary data g", "bc.g")

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def dirichlet(cls, g):
        return cls("dirichlet", g)

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"


def dirichlet_interpolate(d: Discretisation, g, t: float = 0.0) -> np.ndarray:
    """Face averages of ``g(., ., t)`` on the boundary unknowns of ``d``."""
    if len(d.boundary_dofs) == 0:
        raise ConfigError("discretisation has no boundary unknowns for Dirichlet data", "bc")
    return d.boundary_interpolate(g, t)


@dataclass(frozen=True)
class StepInfo:
    iterations: int
    residual: float
    method: str


def _jacobi(K):
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise LinearSolveFailure("non-positive diagonal in conjugate-gradient system")
    inv = 1.0 / diag
    return spla.LinearOperator(K.shape, matvec=lambda x: inv * x, dtype=float)


class LinearSolver:
    """Solves one symmetric positive definite system, reusing a factorisation."""

    def __init__(self, K: sp.spmatrix, method: str, tol: float):
        self.K = K.tocsr()
        self.method = method
        self.tol = tol
        if method == "direct":
            try:
                self._lu = spla.splu(self.K.tocsc())
            except RuntimeError as exc:
                raise LinearSolveFailure(f"factorisation failed: {exc}") from None
        else:
            self._prec = _jacobi(self.K)

    def solve(self, b, x0=None) -> np.ndarray:
        if self.method == "direct":
            x = self._lu.solve(b)
        else:
            x, info = spla.cg(self.K, b, x0=x0, rtol=self.tol, atol=0.0, M=self._prec,
                              maxiter=20 * self.K.shape[0])
            if info != 0:
                raise LinearSolveFailure(f"conjugate gradient did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("linear solve produced non-finite values")
        return x


class TimeStepper:
    """Assembled operators and cached solvers for one simulation."""

    def __init__(self, d: Discretisation, A, F: ReactionTerm | None, cfg: SolverConfig | None = None,
                 bc: BoundaryCondition | None = None, source: Callable | None = None):
        self.d = d
        self.cfg = cfg or SolverConfig()
        self.bc = bc or BoundaryCondition.neumann()
        F = F if F is not None else ReactionTerm("none")
        if self.cfg.clamp_reaction and F.clamp is None and not F.is_zero:
            F = F.with_clamp()
        self.F = F
        self.A = A
        self.source = source
        self.time_dependent = bool(getattr(A, "time_dependent", False))
        self.M = d.mass()
        self._S = None if self.time_dependent else d.stiffness(cell_tensors(d.mesh, A))
        self.area = float(d.mesh.cell_measure.sum())
        self.free = d.interior_dofs if self.bc.is_dirichlet else np.arange(d.ndof)
        self.fixed = d.boundary_dofs if self.bc.is_dirichlet else np.zeros(0, dtype=int)
        if self.bc.is_dirichlet and len(self.fixed) == 0:
            raise ConfigError("discretisation has no boundary unknowns for Dirichlet data", "bc")
        self.rw, self.RP = d.reaction_rule()
        self._solvers = {}
        method = self.cfg.linear
        if method == "auto":
            method = "direct" if len(self.free) < self.cfg.direct_limit else "cg"
        self.linear_method = method

    # operators -------------------------------------------------------------

    def stiffness(self, t: float):
        if self._S is None:
            return self.d.stiffness(cell_tensors(self.d.mesh, self.A, t))
        return self._S

    def system(self, dt: float, t: float):
        return (self.M / dt + self.stiffness(t)).tocsr()

    def _restricted(self, K):
        return K[self.free][:, self.free]

    def _solver(self, dt, t, K):
        key = (dt, t if self.time_dependent else None)
        if key not in self._solvers:
            if len(self._solvers) > 4:
                self._solvers.clear()
            self._solvers[key] = LinearSolver(self._restricted(K), self.linear_method,
                                              self.cfg.linear_tol)
        return self._solvers[key]

    def reaction_load(self, c) -> np.ndarray:
        if self.F.is_zero:
            return np.zeros(self.d.ndof)
        return self.RP.T @ (self.rw * self.F(self.RP @ c))

    def reaction_jacobian(self, c):
        dF = self.F.derivative(self.RP @ c)
        return (self.RP.T @ sp.diags(self.rw * dF) @ self.RP).tocsr()

    def source_load(self, t: float) -> np.ndarray:
        if self.source is None:
            return np.zeros(self.d.ndof)
        return self.d.load(self.source, t)

    def residual(self, c, c_prev, dt, t, explicit_reaction=False) -> np.ndarray:
        """Full residual vector of the step equations (all rows)."""
        K = self.system(dt, t)
        load = self.reaction_load(c_prev if explicit_reaction else c)
        return K @ c - self.M @ c_prev / dt - load - self.source_load(t)

    def _norm(self, r) -> float:
        return float(np.linalg.norm(r[self.free]) / self.area)

    def _dnorm(self, v) -> float:
        return discrete_norm(self.d, v)

    def _start(self, c_prev, t):
        c = np.array(c_prev, dtype=float)
        if self.bc.is_dirichlet:
            c[self.fixed] = self.d.boundary_interpolate(self.bc.g, t)
        return c

    def _linear(self, c, rhs, dt, t, K):
        """Solve the free rows of ``K c = rhs`` with the fixed values already in ``c``."""
        b = rhs[self.free]
        if len(self.fixed):
            b = b - K[self.free][:, self.fixed] @ c[self.fixed]
        out = c.copy()
        out[self.free] = self._solver(dt, t, K).solve(b, x0=c[self.free])
        return out

    # steps -----------------------------------------------------------------

    def imex_step(self, c_prev, dt: float, t_new: float):
        c = self._start(c_prev, t_new)
        K = self.system(dt, t_new)
        rhs = self.M @ c_prev / dt + self.reaction_load(c_prev) + self.source_load(t_new)
        c = self._linear(c, rhs, dt, t_new, K)
        r = K @ c - rhs
        return c, StepInfo(1, self._norm(r), "imex")

    def implicit_step(self, c_prev, dt: float, t_new: float):
        cfg = self.cfg
        K = self.system(dt, t_new)
        base = self.M @ c_prev / dt + self.source_load(t_new)
        c = self._start(c_prev, t_new)
        if self.F.is_zero:
            c = self._linear(c, base, dt, t_new, K)
            return c, StepInfo(1, self._norm(K @ c - base), "linear")

        def residual(v):
            return K @ v - base - self.reaction_load(v)

        r = residual(c)
        res = self._norm(r)
        history = [res]
        method = cfg.nonlinear
        it = 0
        # converged once the residual is small and (after any update) the last increment too
        inc = 0.0 if res <= cfg.nonlinear_tol else np.inf
        while res > cfg.nonlinear_tol or inc > max(cfg.nonlinear_tol, 1e-13 * self._dnorm(c)):
            if it >= cfg.max_nonlinear_iters or not np.isfinite(res):
                raise NonlinearDivergence(
                    f"{method} iteration stalled after {it} iterations (residual {res:.3e}, "
                    f"start {history[0]:.3e})")
            if method == "picard" and cfg.picard_switch is not None and it >= cfg.picard_switch:
                method = "newton"
            if method == "picard":
                new = self._linear(c, base + self.reaction_load(c), dt, t_new, K)
            else:
                J = (K - self.reaction_jacobian(c)).tocsr()
                Jf = J[self.free][:, self.free]
                solver = LinearSolver(Jf, self.linear_method, cfg.linear_tol)
                new = c.copy()
                new[self.free] -= solver.solve(r[self.free])
            inc = self._dnorm(new - c)
            c = new
            it += 1
            r = residual(c)
            res = self._norm(r)
            history.append(res)
        return c, StepInfo(it, res, method)

    def step(self, c_prev, dt, t_new):
        if self.cfg.stepper == "imex":
            return self.imex_step(c_prev, dt, t_new)
        return self.implicit_step(c_prev, dt, t_new)


def implicit_step(d: Discretisation, c_prev, dt: float, A, F, cfg: SolverConfig | None = None,
                  bc: BoundaryCondition | None = None, t_new: float = 0.0):
    """One fully implicit step; returns the new DofVector."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TimeStepper(d, A, F, cfg, bc).implicit_step(np.asarray(c_prev, float), dt, t_new)[0]


def imex_step(d: Discretisation, c_prev, dt: float, A, F, cfg: SolverConfig | None = None,
              bc: BoundaryCondition | None = None, t_new: float = 0.0):
    """One step with implicit diffusion and explicit reaction."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TimeStepper(d, A, F, cfg, bc).imex_step(np.asarray(c_prev, float), dt, t_new)[0]


@dataclass
class SimulationResult:
    discretisation: Discretisation
    dofs: SpaceTimeDofs
    steps: list = field(default_factory=list)
    stepper: TimeStepper | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.dofs.grid

    @property
    def times(self) -> np.ndarray:
        return self.dofs.grid.instants

    @property
    def states(self) -> np.ndarray:
        return self.dofs.values

    @property
    def final(self) -> np.ndarray:
        return self.dofs.values[-1]

    def at(self, t: float) -> np.ndarray:
        return self.dofs.values[self.grid.index_at(t)]

    def masses(self) -> np.ndarray:
        return np.array([total_mass(self.discretisation, v) for v in self.states])

    def l2_norms(self) -> np.ndarray:
        return np.array([l2_norm(self.discretisation, v) for v in self.states])


def run_simulation(d: Discretisation, ic, bc: BoundaryCondition | None, A, F: ReactionTerm | None,
                   timegrid: TimeGrid, cfg: SolverConfig | None = None,
                   source: Callable | None = None, progress: Callable | None = None) -> SimulationResult:
    """Run the gradient scheme from ``c^(0) = J_D ic`` over ``timegrid``.

    ``source(x, y, t)`` is an optional additional load (used by manufactured
    solutions).  ``progress(n, t, info)`` is called after each step.
    """
    stepper = TimeStepper(d, A, F, cfg, bc, source)
    c = d.interpolate(ic)
    if stepper.bc.is_dirichlet:
        c[stepper.fixed] = d.boundary_interpolate(stepper.bc.g, 0.0)
    t = timegrid.instants
    states = np.empty((len(t), d.ndof))
    states[0] = c
    infos = []
    for n in range(timegrid.n_steps):
        dt = float(t[n + 1] - t[n])
        try:
            c, info = stepper.step(c, dt, float(t[n + 1]))
        except SolverError as exc:
            exc.step = n
            raise
        states[n + 1] = c
        infos.append(info)
        if progress is not None:
            progress(n + 1, float(t[n + 1]), info)
    log.debug("simulation finished: %d steps on %d unknowns", timegrid.n_steps, d.ndof)
    return SimulationResult(d, SpaceTimeDofs(timegrid, states), infos, stepper)
