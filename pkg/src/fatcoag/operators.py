"""Laplace-side forms of the self-similar coagulation equation.

Every operator below is a second antiderivative from infinity,
``V(q) = int_q^inf int_p^inf g(r) dr dp = int_q^inf (r - q) g(r) dr``,
so it is returned as a profile with ``V' = -int_q^inf g`` and ``V'' = g``
taken from the defining integrand rather than by differentiation.  When
the profile has decayed to roundoff at the grid end the integrand is not
continued beyond it.

Integrals against the representation kernel are computed on a separate
log grid (the "kernel grid") as a regular-part double sum plus a
one-dimensional integral along the diagonal for the delta part.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grids import (
    CoverageError,
    LaplaceProfile,
    QuadratureGrid,
    _slope,
    cumulative_head,
    cumulative_tail,
    log_grid,
    trapezoid_with_ends,
)
from .kernels import KernelSpec, ker_regular

__all__ = [
    "LaplaceProfile",
    "KernelQuadrature",
    "fbar_profile",
    "op_A",
    "op_B2",
    "op_N",
    "op_BW",
    "op_P",
    "shift",
    "one_minus_zeta",
    "selfsim_residual",
]


def fbar_profile(grid: QuadratureGrid, rho: float) -> LaplaceProfile:
    """The explicit profile rho/(1+q^rho) with exact derivatives."""
    from .special import eval_Fbar, eval_Fbar_deriv, eval_Qbar

    return LaplaceProfile.from_functions(
        grid,
        lambda q: eval_Fbar(q, rho),
        lambda q: eval_Fbar_deriv(q, 1, rho),
        lambda q: eval_Fbar_deriv(q, 2, rho),
        rho,
        rho,
        drop=lambda q: eval_Qbar(q, rho),
    )


def _second_antiderivative(grid: QuadratureGrid, g: np.ndarray, rho: float, truncate: bool = False) -> LaplaceProfile:
    """Profile V with V(q) = int_q^inf (r - q) g(r) dr, V' = -int_q^inf g, V'' = g.

    With ``truncate`` the integrand is taken to vanish beyond the grid
    instead of being continued as a power law.
    """
    q = grid.nodes
    if not np.any(g):
        return LaplaceProfile.zeros(grid, rho)
    s0 = cumulative_tail(grid, g, 0.0, truncate=truncate)
    s1 = cumulative_tail(grid, g, 1.0, truncate=truncate)
    head1 = cumulative_head(grid, g, 1.0)
    value0 = float(head1[-1] + s1[-1])
    # V(0) - V(q) = int_0^q r g + q int_q^inf g, free of cancellation near 0
    drop = head1 + q * s0
    return LaplaceProfile(grid, s1 - q * s0, -s0, np.array(g, dtype=float), value0, rho, drop)


def _truncate(G: LaplaceProfile, truncate: bool | None) -> bool:
    return G.decayed if truncate is None else truncate


def op_A(G: LaplaceProfile, truncate: bool | None = None) -> LaplaceProfile:
    """A(G)(q) = -(1-rho) int_q^inf (r - q) G'(r)/r dr."""
    rho = G.rho
    g = -(1.0 - rho) * G.d1 / G.q
    return _second_antiderivative(G.grid, g, rho, truncate=_truncate(G, truncate))


def op_B2(G: LaplaceProfile, H: LaplaceProfile, truncate: bool | None = None) -> LaplaceProfile:
    """B2(G, H)(q) = -2 int_q^inf (r - q)/r G'(r) (H(0) - H(r)) dr."""
    G._check(H)
    g = -2.0 * G.d1 * H.drop / G.q
    return _second_antiderivative(G.grid, g, G.rho, truncate=_truncate(G, truncate))


def selfsim_residual(F: LaplaceProfile, eps: float = 0.0, kq: "KernelQuadrature | None" = None,
                     truncate: bool | None = None) -> LaplaceProfile:
    """F - A(F) - B2(F, F) - eps B_W(F, F) as a profile."""
    r = F - op_A(F, truncate) - op_B2(F, F, truncate)
    if eps != 0.0:
        if kq is None:
            raise ValueError("a kernel quadrature is needed when eps != 0")
        r = r - eps * op_BW(F, F, kq, truncate)
    return r


# -- integrals against the representation kernel ---------------------------


@dataclass(frozen=True, eq=False)
class KernelQuadrature:
    """Kernel spec together with the log grid used for (xi, eta) integrals."""

    spec: KernelSpec
    grid: QuadratureGrid

    @classmethod
    def default(cls, spec: KernelSpec, z_min: float = 1e-16, z_max: float = 1e12, n: int = 700):
        return cls(spec, log_grid(z_min, z_max, n))

    @cached_property
    def K(self) -> np.ndarray:
        z = self.grid.nodes
        return ker_regular(z[:, None], z[None, :], self.spec)


def _sum_against_kernel(A: np.ndarray, kq: KernelQuadrature) -> np.ndarray:
    """I[r, eta] = int A[r, xi] Kreg(xi, eta) dxi with power-law end completion.

    The grid part is one matrix product; the end pieces only need the two
    outermost xi columns and are added as outer products.
    """
    grid, K = kq.grid, kq.K
    x0, x1, h = grid.x_min, grid.x_max, grid.h
    body = (A * grid.weights) @ K
    # integrand near the ends, for every (r, eta)
    g0 = A[:, :1] * K[:1, :]
    g0n = A[:, 1:2] * K[1:2, :]
    g1 = A[:, -1:] * K[-1:, :]
    g1p = A[:, -2:-1] * K[-2:-1, :]
    a = _slope(g0, g0n, h)
    b = -_slope(g1p, g1, h)
    a = np.where(np.isfinite(a) & (a > -1.0), a, 0.0)
    b = np.where(np.isfinite(b) & (b > 1.0), b, 2.0)
    head = g0 * x0 / (a + 1.0)
    tail = g1 * x1 / (b - 1.0)
    em = (h * h / 12.0) * ((1.0 - b) * x1 * g1 - (a + 1.0) * x0 * g0)
    return body - em + head + tail


def op_N(G: LaplaceProfile, H: LaplaceProfile, kq: KernelQuadrature, r=None) -> np.ndarray:
    """N[G, H](r) = (1/r) int int Ker(xi, eta) [G''(r+xi)(H(eta) - H(eta+r)) + G'(r+xi)(H'(eta) - H'(eta+r))].

    Evaluated at the profile's q nodes unless ``r`` is given.
    """
    r = G.q if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise CoverageError("N is evaluated at r > 0 only")
    z = kq.grid.nodes
    rz = r[:, None] + z[None, :]
    G2 = G(rz, 2)
    G1 = G(rz, 1)
    DH = H.difference(z[None, :], r[:, None], 0)
    DH1 = H.difference(z[None, :], r[:, None], 1)
    reg = _sum_against_kernel(G2, kq) * DH + _sum_against_kernel(G1, kq) * DH1
    line = G2 * DH + G1 * DH1
    total = trapezoid_with_ends(kq.grid, reg) + kq.spec.W_minus_one * trapezoid_with_ends(kq.grid, line)
    return total / r


def op_BW(G: LaplaceProfile, H: LaplaceProfile, kq: KernelQuadrature, truncate: bool | None = None) -> LaplaceProfile:
    """B_W(G, H)(q) = int_q^inf (r - q) N[G, H](r) dr.

    ``truncate`` drops the part of the integral beyond the q grid, which is
    appropriate once the profile has decayed there; by default it is set
    when G has decayed to roundoff at the grid end.
    """
    return _second_antiderivative(G.grid, op_N(G, H, kq), G.rho, truncate=_truncate(G, truncate))


def op_P(F: LaplaceProfile, kq: KernelQuadrature, q=None) -> np.ndarray:
    """P(q) = int int Ker(xi, eta) [F'(xi+q) - F'(xi)] [F(eta) - F(eta+q)].

    This is the kernel-side form of ``(1/2) int int W f f (1-e^-qx)(1-e^-qy)``.
    """
    q = F.q if q is None else np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(q < 0):
        raise ValueError("q must be non-negative")
    out = np.zeros(q.shape)
    pos = q > 0
    if not np.any(pos):
        return out
    qq = q[pos]
    z = kq.grid.nodes
    qz = qq[:, None] + z[None, :]
    X = -F.difference(z[None, :], qq[:, None], 1)
    Y = F.difference(z[None, :], qq[:, None], 0)
    reg = _sum_against_kernel(X, kq) * Y
    out[pos] = trapezoid_with_ends(kq.grid, reg) + kq.spec.W_minus_one * trapezoid_with_ends(kq.grid, X * Y)
    return out


# -- shifts -----------------------------------------------------------------


def shift(G: LaplaceProfile, tau: float) -> LaplaceProfile:
    """(G shifted)(q) = G(q + tau): the Laplace side of multiplying by e^(-tau x)."""
    if tau < 0:
        raise CoverageError("shifts must be non-negative")
    if tau == 0:
        return G
    q = G.q + tau
    t = np.array([tau])
    return LaplaceProfile(G.grid, G(q, 0), G(q, 1), G(q, 2), float(G(t, 0)[0]), G.rho,
                          G.difference(t, G.q, 0))


def one_minus_zeta(G: LaplaceProfile) -> LaplaceProfile:
    """G - G(. + 1): the Laplace side of multiplying by 1 - e^(-x)."""
    return G - shift(G, 1.0)
