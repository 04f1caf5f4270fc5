"""Moments, the kernel-weighted moment beta_W, the exponent Phi, kappa,
boundary-layer predictions and tail normalization of computed profiles.

For the power-law perturbation ``W(x, y) = (x/y)^a + (y/x)^a``

    beta_W(x, f) = x^a m_{-a} + x^-a m_a,
    Phi(x, f)    = eps [m_{-a} Gamma(a, x) + m_a Gamma(-a, x)],

which gives closed forms for the explicit profile that the quadrature
routes are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .grids import GriddedFunction, LaplaceProfile, _upper_inc_gamma, integrate_from, trapezoid_with_ends
from .kernels import KernelSpec
from .norms import full_norm
from .special import exact_moment

__all__ = [
    "MomentDivergenceError",
    "FitInstabilityError",
    "BoundaryLayerPrediction",
    "moments",
    "is_extension",
    "beta_W",
    "beta_W_homogeneous",
    "beta_W_fbar",
    "phi_big",
    "phi_fbar",
    "kappa",
    "tail_normalization_check",
    "boundary_layer_report",
    "distance_report",
]


class MomentDivergenceError(ArithmeticError):
    """The moment integral diverges at one of its ends."""


class FitInstabilityError(ArithmeticError):
    """The quantity meant to be constant over the fit window varies too much."""


def is_extension(gamma: float) -> bool:
    """Negative orders lie outside the range where the moment formula is stated."""
    return gamma < 0.0


def moments(F: LaplaceProfile, gamma: float) -> float:
    """m_gamma = -(1/Gamma(1-gamma)) int_0^inf xi^-gamma F'(xi) dxi.

    Orders in (-rho, 0) use the same quadrature; see :func:`is_extension`.
    """
    rho = F.rho
    if not -rho < gamma < rho:
        raise MomentDivergenceError(f"moment order {gamma} outside (-rho, rho) = ({-rho}, {rho})")
    if gamma == 0.0:
        return F.value0
    head, tail = F._ends
    a = head[1] - gamma
    b = tail[1] + gamma
    if not a > -1.0:
        raise MomentDivergenceError(f"xi^-gamma F' not integrable at 0 (exponent {a:.4g})")
    if not b > 1.0:
        raise MomentDivergenceError(f"xi^-gamma F' not integrable at infinity (decay {b:.4g})")
    q = F.q
    g = -(q ** (-gamma)) * F.d1
    return float(trapezoid_with_ends(F.grid, g, head=a, tail=b)) / sp.gamma(1.0 - gamma)


def _kernel_integral(x, f: GriddedFunction, spec: KernelSpec, values) -> np.ndarray:
    grid = f.grid
    if grid.head_exponent is None or grid.tail_exponent is None:
        raise ValueError("the density grid must declare its end exponents")
    a = spec.alpha
    head = grid.head_exponent - a
    tail = grid.tail_exponent - a
    return trapezoid_with_ends(grid, values, head=head, tail=tail)


def _scalar_or_array(out, x_in):
    out = np.asarray(out, dtype=float).reshape(np.shape(x_in))
    return out.item() if out.ndim == 0 else out


def beta_W(x, f: GriddedFunction, spec: KernelSpec):
    """beta_W(x, f) = int W(x, y) f(y) dy by quadrature on the density grid."""
    x_in = x
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    y = f.grid.nodes
    vals = spec.eval_W(x[:, None], y[None, :]) * f.values[None, :]
    return _scalar_or_array(_kernel_integral(x, f, spec, vals), x_in)


def beta_W_homogeneous(x, f: GriddedFunction, spec: KernelSpec):
    """The same integral written as int W(x/y, 1) f(y) dy (W has degree zero)."""
    x_in = x
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    y = f.grid.nodes
    vals = spec.eval_W(x[:, None] / y[None, :], np.ones((1, y.size))) * f.values[None, :]
    return _scalar_or_array(_kernel_integral(x, f, spec, vals), x_in)


def beta_W_fbar(x, rho: float, alpha: float):
    """Closed form x^a m_{-a} + x^-a m_a for the explicit profile."""
    x = np.asarray(x, dtype=float)
    out = x**alpha * exact_moment(-alpha, rho) + x ** (-alpha) * exact_moment(alpha, rho)
    return out.item() if out.ndim == 0 else out


def phi_big(x, f: GriddedFunction, spec: KernelSpec, eps: float):
    """Phi(x, f) = eps int_x^inf beta_W(y, f) e^-y / y dy.

    beta_W is computed at the density nodes and the outer integral uses
    the same grid; ``x`` may lie below the grid, where the integrand is
    continued as a power law.
    """
    x_in = x
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    if eps == 0.0 or not np.any(f.values):
        return _scalar_or_array(np.zeros(x.shape), x_in)
    y = f.grid.nodes
    inner = GriddedFunction(f.grid.with_exponents(), beta_W(y, f, spec) * np.exp(-y) / y)
    out = np.array([integrate_from(inner, float(xi)) for xi in x])
    return _scalar_or_array(eps * out, x_in)


def phi_fbar(x, rho: float, alpha: float, eps: float):
    """Closed form eps [m_{-a} Gamma(a, x) + m_a Gamma(-a, x)] for the explicit profile."""
    x = np.asarray(x, dtype=float)
    g_plus = sp.gammaincc(alpha, x) * sp.gamma(alpha)
    g_minus = _upper_inc_gamma(-alpha, x)
    out = eps * (exact_moment(-alpha, rho) * g_plus + exact_moment(alpha, rho) * g_minus)
    return out.item() if out.ndim == 0 else out


def kappa(F: LaplaceProfile) -> float:
    """kappa = 2 (F(0) - rho)."""
    return 2.0 * (F.value0 - F.rho)


def tail_normalization_check(F: LaplaceProfile, max_variation: float = 0.1) -> float:
    """Mean of q^(1-rho) (-F'(q)) over the smallest grid decade (target rho^2).

    Raises :class:`FitInstabilityError` when the relative spread over the
    decade exceeds ``max_variation``.
    """
    q = F.q
    sel = q <= 10.0 * q[0]
    c = q[sel] ** (1.0 - F.rho) * -F.d1[sel]
    mean = float(np.mean(c))
    spread = float(np.std(c)) / abs(mean) if mean != 0 else float("inf")
    if not spread <= max_variation:
        raise FitInstabilityError(f"q^(1-rho) F' varies by {spread:.3g} over the first decade")
    return mean


@dataclass(frozen=True)
class BoundaryLayerPrediction:
    """Small-x law x^(2 m0 - 1 - rho) exp(-(eps/a) m_a x^-a) of a perturbed profile."""

    m0: float
    m_alpha: float
    rho: float
    alpha: float
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha out of (0,1)")

    @property
    def exponent(self) -> float:
        return 2.0 * self.m0 - 1.0 - self.rho

    @property
    def has_layer(self) -> bool:
        return self.epsilon > 0.0

    @property
    def layer_scale(self) -> float | None:
        """eps^(1/a), or None when there is no layer."""
        return self.epsilon ** (1.0 / self.alpha) if self.has_layer else None

    def predictor(self, x):
        """The predicted shape up to a constant factor."""
        x = np.asarray(x, dtype=float)
        out = x**self.exponent
        if self.has_layer:
            out = out * np.exp(-(self.epsilon / self.alpha) * self.m_alpha * x ** (-self.alpha))
        return out.item() if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "m0": self.m0,
            "m_alpha": self.m_alpha,
            "exponent": self.exponent,
            "layer_scale": self.layer_scale,
            "has_layer": self.has_layer,
        }


def boundary_layer_report(F: LaplaceProfile, spec: KernelSpec, eps: float) -> BoundaryLayerPrediction:
    return BoundaryLayerPrediction(
        m0=moments(F, 0.0), m_alpha=moments(F, spec.alpha), rho=F.rho, alpha=spec.alpha, epsilon=eps
    )


def distance_report(F: LaplaceProfile, Fbar: LaplaceProfile, mu: float, theta: float) -> dict:
    """Distances of F from the explicit profile."""
    M = F - Fbar
    return {
        "norm_distance": full_norm(M, 2, mu, theta),
        "sup_distance": float(max(np.max(np.abs(M.values)), abs(M.value0))),
        "kappa": kappa(F),
    }
