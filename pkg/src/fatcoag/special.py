"""Exact objects of the constant-kernel problem.

For K = 2 the self-similar profile with fat tail exponent rho is explicit in
Laplace variables, ``F(q) = rho / (1 + q**rho)``.  Its density is a
Mittag-Leffler type function which is evaluated here by a convergent series
for small x, by the divergent large-x expansion for large x, and by a
positive spectral integral in between where neither expansion reaches the
requested accuracy in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special as sp

__all__ = [
    "ExactProfileParams",
    "PoleError",
    "SeriesDivergenceError",
    "eval_Fbar",
    "eval_Fbar_deriv",
    "eval_Qbar",
    "eval_fbar",
    "fbar_small_x_coefficient",
    "fbar_tail_coefficient",
    "exact_moment",
    "gamma_fn",
]

_EPS = np.finfo(float).eps


class PoleError(ValueError):
    """Raised when Gamma is evaluated at a non-positive integer."""


class SeriesDivergenceError(ArithmeticError):
    """Neither expansion of the density reaches the requested accuracy."""


@dataclass(frozen=True)
class ExactProfileParams:
    """Parameters of the explicit constant-kernel profile.

    ``crossover_x=None`` selects, point by point, whichever expansion has the
    smaller estimated error.  ``accuracy`` is the relative error accepted from
    an expansion; when neither qualifies the spectral integral is used, or
    :class:`SeriesDivergenceError` is raised if ``gap_fill`` is off.
    """

    rho: float
    series_tol: float = 1e-17
    crossover_x: float | None = None
    accuracy: float = 1e-11
    gap_fill: bool = True

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho out of (0,1): {self.rho}")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")
        if self.crossover_x is not None and not self.crossover_x > 0:
            raise ValueError("crossover_x must be positive")
        if not self.accuracy > 0:
            raise ValueError("accuracy must be positive")


def _as_params(p) -> ExactProfileParams:
    if isinstance(p, ExactProfileParams):
        return p
    return ExactProfileParams(rho=float(p))


def gamma_fn(z):
    """Euler Gamma function; raises :class:`PoleError` at 0, -1, -2, ..."""
    z = np.asarray(z, dtype=float)
    if np.any((z <= 0) & (z == np.round(z))):
        raise PoleError(f"Gamma has a pole at {z[(z <= 0) & (z == np.round(z))]}")
    out = sp.gamma(z)
    return out.item() if out.ndim == 0 else out


def eval_Fbar(q, p):
    """F(q) = rho / (1 + q^rho)."""
    rho = _as_params(p).rho
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("q must be non-negative")
    out = rho / (1.0 + q**rho)
    return out.item() if out.ndim == 0 else out


def eval_Fbar_deriv(q, order: int, p):
    """First or second derivative of the explicit Laplace profile."""
    rho = _as_params(p).rho
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("derivative of Fbar is singular at q = 0")
    s = q**rho
    if order == 1:
        out = -(rho**2) * s / (q * (1.0 + s) ** 2)
    elif order == 2:
        out = rho**2 * s * ((1.0 - rho) + (1.0 + rho) * s) / (q**2 * (1.0 + s) ** 3)
    else:
        raise ValueError("order must be 1 or 2")
    return out.item() if out.ndim == 0 else out


def eval_Qbar(q, p):
    """Q(q) = F(0) - F(q) = rho q^rho / (1 + q^rho)."""
    rho = _as_params(p).rho
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("q must be non-negative")
    s = q**rho
    out = rho * s / (1.0 + s)
    return out.item() if out.ndim == 0 else out


def fbar_small_x_coefficient(p) -> float:
    """Limit of x^(1-rho) fbar(x) as x -> 0, i.e. rho / Gamma(rho)."""
    rho = _as_params(p).rho
    return rho / sp.gamma(rho)


def fbar_tail_coefficient(p) -> float:
    """Limit of x^(1+rho) fbar(x) as x -> infinity, i.e. rho^2 / Gamma(1-rho)."""
    rho = _as_params(p).rho
    return rho**2 / sp.gamma(1.0 - rho)


# -- density: the three evaluation routes ----------------------------------


def _series(x: np.ndarray, rho: float, tol: float):
    """Convergent series with a roundoff-based relative error estimate."""
    n_max = 16
    while True:
        n = np.arange(1, n_max + 1)
        logmag = (n[None, :] * rho - 1.0) * np.log(x)[:, None] - sp.gammaln(n * rho)[None, :]
        last = logmag[:, -1]
        head = np.max(logmag, axis=1)
        if np.all(last < head + np.log(tol)) or n_max >= 4096:
            break
        n_max *= 2
    ref = np.max(logmag, axis=1, keepdims=True)
    mags = np.exp(logmag - ref)
    sign = np.where(n % 2 == 1, 1.0, -1.0)
    total = (mags * sign).sum(axis=1)
    absolute = mags.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        value = rho * total * np.exp(ref[:, 0])
        # cap the denominator at half the leading tail term so that a fully
        # cancelled sum cannot make the roundoff estimate look small
        scale = np.minimum(np.abs(value), 0.5 * rho**2 / sp.gamma(1.0 - rho) * x ** (-1.0 - rho))
        err = 4.0 * _EPS * rho * absolute * np.exp(ref[:, 0]) / scale
        converged = logmag[:, -1] < head + np.log(tol)
        err = np.where(converged & np.isfinite(err), err, np.inf)
    return value, err


def _asymptotic(x: np.ndarray, rho: float, k_max: int = 400):
    """Optimally truncated large-x expansion with smallest-term error estimate."""
    k = np.arange(2, k_max + 2)
    z = rho - rho * k
    at_pole = np.isclose(z, np.round(z), rtol=0, atol=1e-13) & (z <= 0)
    log_rg = np.where(at_pole, -np.inf, -sp.gammaln(np.where(at_pole, 0.5, z)))
    sgn_rg = np.where(at_pole, 0.0, sp.gammasgn(np.where(at_pole, 0.5, z)))
    sign = np.where(k % 2 == 1, 1.0, -1.0) * sgn_rg
    logmag = (rho - 1.0 - rho * k)[None, :] * np.log(x)[:, None] + log_rg[None, :]
    # truncate just before the smallest non-vanishing term
    masked = np.where(at_pole[None, :], np.inf, logmag)
    k_stop = np.argmin(masked, axis=1)
    keep = (np.arange(k.size)[None, :] < k_stop[:, None]) & ~at_pole[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = np.where(keep, sign[None, :] * np.exp(np.where(keep, logmag, 0.0)), 0.0)
        total = terms.sum(axis=1)
        smallest = np.exp(masked[np.arange(x.size), k_stop])
        err = np.where(k_stop > 0, smallest / np.abs(total), np.inf)
    return rho * total, err


def _spectral_one(x: float, rho: float) -> float:
    # fbar(x) = (rho/pi) int_0^inf e^{-r x} r^rho sin(pi rho) / |1 + r^rho e^{i pi rho}|^2 dr,
    # written in t = r x; the integrand is positive so there is no cancellation
    s, c = np.sin(np.pi * rho), np.cos(np.pi * rho)

    def g(t):
        w = (t / x) ** rho
        return np.exp(-t) * w * s / (1.0 + 2.0 * w * c + w * w)

    a, _ = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(g, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return rho / (np.pi * x) * (a + b)


def fbar_spectral(x, p):
    """Density by the spectral integral (slow, positive, no cancellation)."""
    rho = _as_params(p).rho
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([_spectral_one(float(xi), rho) for xi in x])


def eval_fbar(x, p):
    """Physical-space density of the explicit constant-kernel profile."""
    p = _as_params(p)
    x_in = np.asarray(x, dtype=float)
    if np.any(x_in <= 0):
        raise ValueError("x must be positive")
    x = np.atleast_1d(x_in).ravel()
    v_s, e_s = _series(x, p.rho, p.series_tol)
    v_a, e_a = _asymptotic(x, p.rho)
    if p.crossover_x is None:
        use_series = e_s <= e_a
    else:
        use_series = x < p.crossover_x
    value = np.where(use_series, v_s, v_a)
    err = np.where(use_series, e_s, e_a)
    gap = ~(err <= p.accuracy)
    if np.any(gap):
        if not p.gap_fill:
            raise SeriesDivergenceError(
                f"no expansion reaches relative accuracy {p.accuracy} at x = {x[gap].min():g}"
            )
        value[gap] = fbar_spectral(x[gap], p)
    value = np.maximum(value, 0.0).reshape(x_in.shape)
    return value.item() if value.ndim == 0 else value


def exact_moment(gamma: float, p) -> float:
    """Moment m_gamma = int x^gamma fbar(x) dx of the explicit profile."""
    rho = _as_params(p).rho
    if not -rho < gamma < rho:
        raise ValueError(f"moment order must lie in (-rho, rho); got {gamma}")
    g = gamma / rho
    return rho * sp.gamma(1.0 - g) * sp.gamma(1.0 + g) / sp.gamma(1.0 - gamma)
