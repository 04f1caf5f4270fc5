"""The perturbation W(x, y) = (x/y)^a + (y/x)^a and its Laplace representation.

The kernel is written as ``W(x, y)/(x + y) = int int Ker(xi, eta) exp(-xi x - eta y)``
with ``Ker = Kreg + W(-1) delta(xi - eta)``.  The regular part is
``Kreg(xi, eta) = phi(eta/xi)/xi`` where phi is the jump of the analytic
continuation of W(z, 1) across the negative real axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grids import QuadratureGrid, log_grid, trapezoid_with_ends

__all__ = [
    "KernelSpec",
    "HypothesisError",
    "power_law_kernel",
    "phi_plemelj",
    "phi_explicit",
    "ker_regular",
    "verify_laplace_identity",
    "ker_integral_bounds_probe",
]

_TAYLOR_SWITCH = 1e-6


class HypothesisError(ValueError):
    """Exponents passed to the kernel-integral probe violate its hypotheses."""


@dataclass(frozen=True)
class KernelSpec:
    """A homogeneous perturbation kernel with its representation data.

    ``continuation`` maps complex z to the analytic extension of W(z, 1)
    (principal branch, cut along the negative axis).  It is used for the
    boundary-value construction of phi.
    """

    alpha: float
    eval_W: Callable[[np.ndarray, np.ndarray], np.ndarray]
    continuation: Callable[[np.ndarray], np.ndarray]
    C_W: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha out of (0,1): {self.alpha}")

    @property
    def W_minus_one(self) -> float:
        """Value of the continuation at -1 (equal from both sides)."""
        return float(np.real(0.5 * (self.continuation(-1.0 + 0j) + self.continuation(complex(-1.0, -0.0)))))

    @property
    def delta_coeff(self) -> float:
        return self.W_minus_one

    def phi(self, s):
        return phi_explicit(s, self.alpha)

    def ker_regular(self, xi, eta):
        return ker_regular(xi, eta, self)


def power_law_kernel(alpha: float) -> KernelSpec:
    """W(x, y) = (x/y)^alpha + (y/x)^alpha."""

    def eval_W(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = x / y
        return r**alpha + r ** (-alpha)

    def continuation(z):
        z = np.asarray(z, dtype=complex)
        return z**alpha + z ** (-alpha)

    return KernelSpec(alpha=alpha, eval_W=eval_W, continuation=continuation, C_W=1.0)


def _jump_quotient(s, spec: KernelSpec):
    upper = np.asarray(-s, dtype=complex) + 0j
    lower = np.conj(upper)  # conj flips the signed zero: the lower side of the cut
    jump = spec.continuation(lower) - spec.continuation(upper)
    return np.real(jump / (2j * np.pi * (1.0 - s)))


def phi_plemelj(s, spec: KernelSpec):
    """Jump function from the boundary values of the analytic extension.

    ``phi(s) = [W_-(-s) - W_+(-s)] / (2 pi i (1 - s))`` where ``W_+`` and
    ``W_-`` are the limits from the upper and lower half planes, selected
    exactly through the sign of a zero imaginary part.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s must be positive")
    near = np.abs(s - 1.0) < _TAYLOR_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.array(_jump_quotient(s, spec), dtype=float)
    if np.any(near):
        # removable point: Richardson-extrapolated symmetric quotients
        def sym(d):
            return 0.5 * (_jump_quotient(s[near] + d, spec) + _jump_quotient(s[near] - d, spec))

        d = 1e-3
        out[near] = (4.0 * sym(0.5 * d) - sym(d)) / 3.0
    return out.item() if out.ndim == 0 else out


def phi_explicit(s, alpha: float):
    """phi(s) = sin(pi a)/pi (s^a - s^-a)/(s - 1), with its limit 2 a sin(pi a)/pi at 1."""
    s = np.asarray(s, dtype=float)
    c = np.sin(np.pi * alpha) / np.pi
    t = np.log(s)
    near = np.abs(s - 1.0) < _TAYLOR_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        # (s^a - s^-a)/(s - 1) = 2 sinh(a t) / (e^t - 1)
        quotient = 2.0 * np.sinh(alpha * t) / np.expm1(t)
    taylor = 2.0 * alpha * (1.0 - 0.5 * t)  # first-order expansion in t = log s
    out = c * np.where(near, taylor, quotient)
    return out.item() if out.ndim == 0 else out


def ker_regular(xi, eta, spec: KernelSpec):
    """Regular part of the representation kernel, phi(eta/xi)/xi."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return phi_explicit(eta / xi, spec.alpha) / xi


def _ker_weights(grid: QuadratureGrid, spec: KernelSpec) -> np.ndarray:
    """Kreg on grid x grid, as phi of the log-ratio (depends on i - j only)."""
    x = grid.nodes
    return ker_regular(x[:, None], x[None, :], spec)


def verify_laplace_identity(x: float, y: float, spec: KernelSpec, grid: QuadratureGrid | None = None) -> float:
    """Residual of ``int int Kreg e^(-xi x - eta y) + W(-1)/(x+y) - W(x,y)/(x+y)``.

    The regular part is a 2D log-trapezoid with power-law completion along
    both axes; the delta line is integrated exactly.
    """
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    if grid is None:
        grid = log_grid(1e-14 / max(x, y), 60.0 / min(x, y), 900)
    z = grid.nodes
    if z[-1] * min(x, y) < 30.0 or z[0] * max(x, y) > 1e-8:
        from .grids import CoverageError

        raise CoverageError("quadrature grid does not cover the exponential scales of (x, y)")
    K = _ker_weights(grid, spec)
    ex = np.exp(-z * x)
    ey = np.exp(-z * y)
    inner = trapezoid_with_ends(grid, K * ey[None, :])  # over eta for each xi
    reg = float(trapezoid_with_ends(grid, inner * ex))
    rhs = reg + spec.W_minus_one / (x + y)
    return rhs - float(spec.eval_W(x, y)) / (x + y)


def ker_integral_bounds_probe(spec: KernelSpec, a1: float, b1: float, a2: float, b2: float,
                              n: int = 800, z_min: float = 1e-20, z_max: float = 1e20) -> float:
    """int int |Ker| xi^-a1 (xi+1)^-b1 eta^-a2 (eta+1)^-b2, regular part plus delta line."""
    al = spec.alpha
    for ak, bk in ((a1, b1), (a2, b2)):
        if not 0.0 <= ak < 1.0 - al:
            raise HypothesisError("each a_k must lie in [0, 1 - alpha)")
        if not ak + bk > al:
            raise HypothesisError("each a_k + b_k must exceed alpha")
    if not a1 + a2 < 1.0:
        raise HypothesisError("a1 + a2 must be below 1")
    if not a1 + b1 + a2 + b2 > 1.0:
        raise HypothesisError("a1 + b1 + a2 + b2 must exceed 1")
    grid = log_grid(z_min, z_max, n)
    z = grid.nodes
    wx = z ** (-a1) * (z + 1.0) ** (-b1)
    wy = z ** (-a2) * (z + 1.0) ** (-b2)
    K = np.abs(_ker_weights(grid, spec))
    inner = trapezoid_with_ends(grid, K * wy[None, :])
    reg = float(trapezoid_with_ends(grid, inner * wx))
    line = float(trapezoid_with_ends(grid, wx * wy)) * abs(spec.W_minus_one)
    return reg + line
