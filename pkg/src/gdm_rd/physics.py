"""Model data for the glioma experiments.

The tumour diffusion tensor is built from a water diffusion tensor ``DT``
(synthetic here) through its fractional anisotropy and principal direction::

    M   = kappa * FA(DT)
    A   = (r^2 / mu) * [(delta + (1 - delta)(1 - q)) I + 2 (1 - delta) q phi_1 phi_1^T],
    q   = I_2(M) / I_0(M)

with ``I_j`` the modified Bessel functions of the first kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .core import tensor_eigenvalues
from .errors import InvalidParams, ZeroTensor

# ---------------------------------------------------------------------------
# modified Bessel functions

_SERIES_LIMIT = 20.0


def _bessel_series(nu: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = half ** nu / math.factorial(nu)
    total = term.copy()
    k = 0
    while True:
        k += 1
        term = term * half * half / (k * (k + nu))
        total += term
        if np.all(term <= 1e-17 * total) or k > 500:
            return total


def _bessel_asymptotic_sum(nu: int, x: np.ndarray) -> np.ndarray:
    """``sqrt(2 pi x) e^{-x} I_nu(x)`` from the large-argument expansion."""
    mu = 4.0 * nu * nu
    term = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 200):
        term = term * -(mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = np.abs(term)
        # stop each entry once terms are negligible or start to diverge
        active &= (mag < prev) & (mag > 1e-17 * np.abs(total))
        if not active.any():
            break
        total = np.where(active, total + term, total)
        prev = mag
    return total


def bessel_i(nu: int, x):
    """Modified Bessel function ``I_nu(x)`` for integer ``nu >= 0``, ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _SERIES_LIMIT
    out[small] = _bessel_series(nu, x[small])
    big = ~small
    if big.any():
        xb = x[big]
        out[big] = np.exp(xb) / np.sqrt(2 * np.pi * xb) * _bessel_asymptotic_sum(nu, xb)
    return out if out.ndim else float(out)


def bessel_ratio(M):
    """``I_2(M) / I_0(M)`` for ``M >= 0``; lies in ``[0, 1)`` and increases with ``M``."""
    M = np.asarray(M, dtype=float)
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValueError("bessel_ratio needs finite M >= 0")
    flat = np.atleast_1d(M).ravel()
    out = np.empty_like(flat)
    small = flat <= _SERIES_LIMIT
    out[small] = _bessel_series(2, flat[small]) / _bessel_series(0, flat[small])
    big = ~small
    if big.any():
        out[big] = _bessel_asymptotic_sum(2, flat[big]) / _bessel_asymptotic_sum(0, flat[big])
    out = out.reshape(M.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# tensors


@dataclass(frozen=True)
class TensorParams:
    kappa: float = 0.0
    delta: float = 0.05
    speed: float = 1.0
    turning: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise InvalidParams(f"delta must lie in (0, 1], got {self.delta}")
        if self.kappa < 0:
            raise InvalidParams(f"kappa must be >= 0, got {self.kappa}")
        if self.turning <= 0:
            raise InvalidParams("turning rate mu must be positive (r^2/mu is undefined otherwise)")
        if self.speed <= 0:
            raise InvalidParams("speed r must be positive")

    @property
    def prefactor(self) -> float:
        return self.speed ** 2 / self.turning


@dataclass(frozen=True)
class WaterTensor:
    matrix: np.ndarray
    eigenvalues: np.ndarray  # (lambda_1, lambda_2), lambda_1 >= lambda_2
    eigenvectors: np.ndarray  # columns phi_1, phi_2

    @property
    def phi1(self) -> np.ndarray:
        return self.eigenvectors[..., :, 0]


def _dti_offset(x, y):
    return 0.25 * np.exp(-0.05 * x ** 2) - 0.25 * np.exp(-0.5 * y ** 2)


def dti_water_tensor(points) -> np.ndarray:
    """Synthetic water tensor ``diag(0.5 - d, 0.5 + d)`` at an ``(n, 2)`` array of points."""
    p = np.asarray(points, dtype=float)
    d = _dti_offset(p[..., 0], p[..., 1])
    T = np.zeros(p.shape[:-1] + (2, 2))
    T[..., 0, 0] = 0.5 - d
    T[..., 1, 1] = 0.5 + d
    return T


def principal_direction(T) -> np.ndarray:
    """Unit eigenvector of the larger eigenvalue of symmetric 2x2 tensors.

    For equal eigenvalues the x axis is returned; every use of the direction
    is then multiplied by a vanishing anisotropy, so the choice is immaterial.
    """
    T = np.asarray(T, dtype=float)
    theta = 0.5 * np.arctan2(T[..., 0, 1] + T[..., 1, 0], T[..., 0, 0] - T[..., 1, 1])
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def water_tensor(x) -> WaterTensor:
    T = dti_water_tensor(x)
    lam = tensor_eigenvalues(T)
    phi1 = principal_direction(T)
    phi2 = np.stack([-phi1[..., 1], phi1[..., 0]], axis=-1)
    if np.any(lam[..., 1] < -1e-14):
        raise ZeroTensor("water tensor is not positive semidefinite")
    return WaterTensor(T, lam, np.stack([phi1, phi2], axis=-1))


def fractional_anisotropy(lam1, lam2):
    """``|lam1 - lam2| / sqrt(lam1^2 + lam2^2)``, in ``[0, 1]`` for nonnegative inputs."""
    l1 = np.asarray(lam1, dtype=float)
    l2 = np.asarray(lam2, dtype=float)
    norm = np.hypot(l1, l2)
    if np.any(norm == 0.0):
        raise ZeroTensor("fractional anisotropy of the zero tensor is undefined")
    fa = np.abs(l1 - l2) / norm
    return fa if fa.ndim else float(fa)


def tensor_fa(T):
    lam = tensor_eigenvalues(T)
    return fractional_anisotropy(lam[..., 0], lam[..., 1])


def diffusion_tensor(x, p: TensorParams, water: Callable = dti_water_tensor) -> np.ndarray:
    """Tumour diffusion tensor at point(s) ``x`` (shape ``(2,)`` or ``(n, 2)``)."""
    DT = water(np.asarray(x, dtype=float))
    M = p.kappa * tensor_fa(DT)
    q = bessel_ratio(M)
    phi = principal_direction(DT)
    iso = p.delta + (1.0 - p.delta) * (1.0 - q)
    aniso = 2.0 * (1.0 - p.delta) * q
    eye = np.eye(2)
    A = (np.asarray(iso)[..., None, None] * eye
         + np.asarray(aniso)[..., None, None] * phi[..., :, None] * phi[..., None, :])
    return p.prefactor * A


class DiffusionField:
    """Tensor field ``A(x)`` (optionally ``A(x, t)``) evaluated on point arrays."""

    def __init__(self, func: Callable, time_dependent: bool = False, name: str = "custom"):
        self._func = func
        self.time_dependent = time_dependent
        self.name = name

    def __call__(self, points, t: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        A = self._func(p, t) if self.time_dependent else self._func(p)
        return np.asarray(A, dtype=float).reshape(len(p), 2, 2)

    @classmethod
    def constant(cls, A) -> "DiffusionField":
        A = np.asarray(A, dtype=float)
        return cls(lambda p: np.broadcast_to(A, (len(p), 2, 2)).copy(), name="constant")

    @classmethod
    def dti(cls, params: TensorParams) -> "DiffusionField":
        f = cls(lambda p: diffusion_tensor(p, params), name=f"dti(kappa={params.kappa})")
        f.params = params
        return f

    def eigenvalue_bounds(self, points, t: float = 0.0):
        lam = tensor_eigenvalues(self(points, t))
        return float(lam[:, 1].min()), float(lam[:, 0].max())


# ---------------------------------------------------------------------------
# reaction terms

REACTION_KINDS = ("none", "exponential", "logistic", "bistable", "polynomial")


@dataclass(frozen=True)
class ReactionTerm:
    """Polynomial reaction ``F(s)``.

    ``clamp = (lo, hi)`` evaluates ``F(clip(s, lo, hi))`` so that ``F`` is
    bounded (linear growth holds trivially); the derivative is then zero
    outside the interval.
    """
    kind: str = "bistable"
    rho: float = 1.0
    alpha: float = 0.1
    coefficients: tuple = ()
    clamp: tuple | None = None
    poly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in REACTION_KINDS:
            raise InvalidParams(f"unknown reaction kind {self.kind!r}")
        if self.kind == "bistable" and not 0.0 < self.alpha < 1.0:
            raise InvalidParams("bistable threshold alpha must lie in (0, 1)")
        r, a = self.rho, self.alpha
        coef = {
            "none": [0.0],
            "exponential": [0.0, r],
            "logistic": [0.0, r, -r],
            "bistable": [0.0, -r * a, r * (1.0 + a), -r],
            "polynomial": list(self.coefficients) or [0.0],
        }[self.kind]
        object.__setattr__(self, "poly", Polynomial(coef))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.poly.coef)

    def with_clamp(self, lo: float = -0.5, hi: float = 1.5) -> "ReactionTerm":
        return ReactionTerm(self.kind, self.rho, self.alpha, self.coefficients, (lo, hi))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.clamp is not None:
            s = np.clip(s, *self.clamp)
        return self.poly(s)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        d = self.poly.deriv()(s)
        if self.clamp is not None:
            lo, hi = self.clamp
            d = np.where((s < lo) | (s > hi), 0.0, d)
        return d


def reaction_eval(F: ReactionTerm, s):
    return F(s)


def reaction_derivative(F: ReactionTerm, s):
    return F.derivative(s)


# ---------------------------------------------------------------------------
# initial data

_GLIOMA_TERMS = (
    # amplitude, (cx, cy), (ax, ay):  a * exp(-ax (x - cx)^2 - ay (y - cy)^2)
    (0.8, (1.0, 3.0), (0.1, 0.3)),
    (0.75, (10.0, -9.0), (0.25, 0.15)),
    (0.6, (-3.0, -4.0), (0.2, 0.5)),
    (0.5, (-5.0, 1.0), (0.25, 0.3)),
)


def glioma_initial(x, y):
    """Sum of four distorted Gaussians seeding the tumour density."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for amp, (cx, cy), (ax, ay) in _GLIOMA_TERMS:
        out = out + amp * np.exp(-ax * (x - cx) ** 2 - ay * (y - cy) ** 2)
    return out


def gaussian_initial(amplitude: float, centre=(0.0, 0.0), width: float = 2.0):
    cx, cy = centre

    def f(x, y):
        return amplitude * np.exp(-((np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2)
                                  / (2.0 * width ** 2))
    return f


def constant_initial(value: float):
    return lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))
