"""Linearization of the constant-kernel equation around rho/(1+q^rho) and
its explicit inverse.

With ``s = q^rho``, ``A(q) = (2s+1)/(1+s)^2`` and ``B(q) = s/(1+s)^2`` the
inverse reads

    G(q) = -(H(0)/rho) A(q) + B(q) int_0^q j(r) dr,
    j = (1+r^rho)^2 r^-rho H' - r^(rho-1) H + (2 r^rho + 1) r^(-1-rho) (H(0) - H).

G' and G'' follow by differentiating the prefactors in closed form; the
integral contributes j and j' at the upper limit.
"""
from __future__ import annotations

import numpy as np

from .grids import LaplaceProfile, QuadratureError, cumulative_head
from .operators import fbar_profile, op_A, op_B2

__all__ = ["apply_LL", "apply_LLinv", "inverse_integrand", "admissible_examples"]


def apply_LL(G: LaplaceProfile, Fbar: LaplaceProfile | None = None) -> LaplaceProfile:
    """LL(G) = G - A(G) - B2(Fbar, G) - B2(G, Fbar)."""
    if Fbar is None:
        Fbar = fbar_profile(G.grid, G.rho)
    return G - op_A(G) - op_B2(Fbar, G) - op_B2(G, Fbar)


def inverse_integrand(H: LaplaceProfile):
    """The integrand j of the inverse and its derivative j' at the nodes."""
    rho = H.rho
    r = H.q
    s = r**rho
    ds = rho * s / r
    dH = H.drop
    c1 = 1.0 / s + 2.0 + s  # (1+s)^2 / s
    c3 = 2.0 / r + r ** (-1.0 - rho)  # (2s+1) r^(-1-rho)
    j = c1 * H.d1 - r ** (rho - 1.0) * H.values + c3 * dH
    dj = (
        (1.0 - s**-2) * ds * H.d1
        + c1 * H.d2
        - (rho - 1.0) * r ** (rho - 2.0) * H.values
        - r ** (rho - 1.0) * H.d1
        - (2.0 / r**2 + (1.0 + rho) * r ** (-2.0 - rho)) * dH
        - c3 * H.d1
    )
    return j, dj


def apply_LLinv(H: LaplaceProfile, mu: float | None = None, chi: float | None = None) -> LaplaceProfile:
    """Explicit inverse of the linearized operator.

    ``mu`` and ``chi`` only enter the admissibility check: when given, the
    head of ``H(0) - H`` must vanish at least like q^(rho + mu) up to a
    generous margin, otherwise the integral from 0 is not defined.
    """
    rho = H.rho
    q = H.q
    if not np.any(H.values) and H.value0 == 0.0:
        return LaplaceProfile.zeros(H.grid, rho)
    j, dj = inverse_integrand(H)
    if mu is not None:
        _check_head(H, rho, mu)
    try:
        J = cumulative_head(H.grid, j)
    except QuadratureError as exc:
        raise QuadratureError(f"inverse integrand not integrable at 0: {exc}") from exc
    s = q**rho
    s1 = rho * s / q
    s2 = rho * (rho - 1.0) * s / q**2
    A = (2.0 * s + 1.0) / (1.0 + s) ** 2
    A_s = -2.0 * s / (1.0 + s) ** 3
    A_ss = (4.0 * s - 2.0) / (1.0 + s) ** 4
    B = s / (1.0 + s) ** 2
    B_s = (1.0 - s) / (1.0 + s) ** 3
    B_ss = (2.0 * s - 4.0) / (1.0 + s) ** 4
    A1, A2 = A_s * s1, A_ss * s1**2 + A_s * s2
    B1, B2 = B_s * s1, B_ss * s1**2 + B_s * s2
    c = -H.value0 / rho
    values = c * A + B * J
    drop = c * (s / (1.0 + s)) ** 2 - B * J  # c (1 - A) - B J
    d1 = c * A1 + B1 * J + B * j
    d2 = c * A2 + B2 * J + 2.0 * B1 * j + B * dj
    return LaplaceProfile(H.grid, values, d1, d2, c, rho, drop)


def _check_head(H: LaplaceProfile, rho: float, mu: float) -> None:
    """Reject inputs whose H(0) - H(q) decays slower than q^(rho+mu) at the head."""
    dH = np.abs(H.drop[:2])
    if dH[0] == 0 or dH[1] == 0:
        return
    slope = np.log(dH[1] / dH[0]) / H.grid.h
    if slope < rho + mu - 0.05:
        raise QuadratureError(
            f"H(0) - H(q) vanishes like q^{slope:.3f} at the head; need at least q^(rho+mu) = q^{rho + mu:.3f}"
        )


def admissible_examples(grid, rho: float) -> dict[str, LaplaceProfile]:
    """Smooth profiles with exact derivatives for round-trip checks.

    All but ``unit_at_zero`` vanish at q = 0 and decay like 1/q; that one
    has G(0) = 1 and exercises the boundary term of the inverse.
    """
    q = grid.nodes
    e1, e2 = np.exp(-q), np.exp(-2.0 * q)
    p = 1.0 + q
    # differences of nearly equal values near q = 0 are formed with expm1/log1p
    g1 = -e1 * np.expm1(-q)
    small = np.minimum(q, 1.0)
    g3 = np.where(q < 1.0, e1 * np.expm1(small - 2.0 * np.log1p(small)), p**-2 - e1)
    diff_exp = LaplaceProfile(grid, g1, -e1 + 2.0 * e2, e1 - 4.0 * e2, 0.0, rho, -g1)
    bump = LaplaceProfile(grid, q / p**2, (1.0 - q) / p**3, (2.0 * q - 4.0) / p**4, 0.0, rho, -q / p**2)
    mixed = LaplaceProfile(grid, g3, -2.0 * p**-3 + e1, 6.0 * p**-4 - e1, 0.0, rho, -g3)
    unit = LaplaceProfile(grid, p**-2, -2.0 * p**-3, 6.0 * p**-4, 1.0, rho, q * (2.0 + q) / p**2)
    return {"diff_exp": diff_exp, "bump": bump, "mixed": mixed, "unit_at_zero": unit}
