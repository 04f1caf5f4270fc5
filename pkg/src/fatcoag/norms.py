"""Weights and weighted sup-norms for Laplace-side profiles.

``omega_{a,b}(q)`` is ``q^a`` on (0, 1] and ``q^-b`` on [1, inf).  The
seminorm of order k is

    sup_q (1+q)^(chi+mu+rho) q^(k-rho-mu) |G^(k)(q)|,

and the full norm adds the base norm ``sup (1+q)^chi |G|`` (the k = 0
seminorm with mu = -rho) to the seminorms of orders 1..k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .grids import LaplaceProfile

__all__ = [
    "NormSpec",
    "weight",
    "seminorm",
    "full_norm",
    "default_theta",
    "default_mu",
    "mu_star",
]

# a weighted quantity whose end exponent is below -_DIVERGENCE_MARGIN is
# treated as unbounded; the margin absorbs the error of a two-node slope fit
_DIVERGENCE_MARGIN = 2e-2


@dataclass(frozen=True)
class NormSpec:
    """Order k, shift mu, decay chi and tail exponent rho of a seminorm."""

    k: int
    mu: float
    chi: float
    rho: float

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho out of (0,1)")
        if self.mu < -self.rho:
            raise ValueError("mu must be at least -rho")


def mu_star(rho: float) -> float:
    return min(rho, 1.0 - rho)


def default_mu(rho: float) -> float:
    return 0.5 * mu_star(rho)


def default_theta(alpha: float, rho: float) -> float:
    """Midpoint of (max(alpha, 1 - rho), 1/2)."""
    lo = max(alpha, 1.0 - rho)
    if not lo < 0.5:
        raise ValueError(f"no admissible theta: max(alpha, 1-rho) = {lo} >= 1/2")
    return 0.5 * (lo + 0.5)


def weight(a: float, b: float, q):
    """omega_{a,b}(q) = q^a for q <= 1 and q^-b for q >= 1."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("q must be positive")
    out = np.where(q <= 1.0, q**a, q ** (-b))
    return out.item() if out.ndim == 0 else out


def _weighted(G: LaplaceProfile, spec: NormSpec, q, values=None):
    if values is None:
        values = G(q, spec.k)
    w = (1.0 + q) ** (spec.chi + spec.mu + spec.rho) * q ** (spec.k - spec.rho - spec.mu)
    return w * np.abs(values)


def _end_exponents(G: LaplaceProfile, spec: NormSpec):
    """Exponents of the weighted quantity as q -> 0 and as q -> inf."""
    head, tail = G._ends
    k = spec.k
    if k == 0:
        # |G| tends to |G(0)| unless G(0) = 0, in which case it behaves like the drop
        a = 0.0 if G.value0 != 0.0 else head[0]
    else:
        a = head[k]
    return k - spec.rho - spec.mu + a, spec.chi + k - tail[k]


def seminorm(G: LaplaceProfile, spec: NormSpec, extend: bool = True) -> float:
    """Weighted sup of |G^(k)|.

    The grid sup is refined by maximizing the spline interpolant next to the
    best node.  Beyond the grid the weighted quantity is a power law; if it
    grows towards either end the seminorm is infinite, and if it levels off
    the limiting value is included in the sup.  With ``extend=False`` only
    the grid interval is searched.
    """
    if spec.rho != G.rho:
        raise ValueError("norm and profile use different rho")
    y = G.derivative(spec.k)
    if not np.any(y):
        return 0.0
    q = G.q
    wv = _weighted(G, spec, q, y)
    e_head, e_tail = _end_exponents(G, spec) if extend else (0.0, -1.0)
    if e_head < -_DIVERGENCE_MARGIN or e_tail > _DIVERGENCE_MARGIN:
        return float("inf")
    best = float(np.max(wv))
    i = int(np.argmax(wv))
    if 0 < i < q.size - 1:
        u = G.grid.u

        def neg(t):
            qq = np.exp(np.array([t]))
            return -float(_weighted(G, spec, qq)[0])

        res = minimize_scalar(neg, bounds=(u[i - 1], u[i + 1]), method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    # levelled-off ends: the limit is the end value extrapolated with exponent ~ 0
    if extend and abs(e_head) <= _DIVERGENCE_MARGIN:
        best = max(best, float(wv[0]))
        if spec.k == 0 and spec.mu == -spec.rho:
            # the weight tends to 1 and G to its declared value at 0
            best = max(best, abs(G.value0))
    if abs(e_tail) <= _DIVERGENCE_MARGIN:
        best = max(best, float(wv[-1]))
    return best


def full_norm(G: LaplaceProfile, k: int, mu: float, chi: float, extend: bool = True) -> float:
    """||G||_{0,-rho,chi} plus the seminorms of orders 1..k."""
    if k not in (1, 2):
        raise ValueError("full norm is defined for k = 1 or 2")
    rho = G.rho
    total = seminorm(G, NormSpec(0, -rho, chi, rho), extend)
    for j in range(1, k + 1):
        total += seminorm(G, NormSpec(j, mu, chi, rho), extend)
    return total
