"""Log-uniform grids on (0, inf), quadrature with power-law end completion,
cumulative integrals, the numerical Laplace transform, and gridded Laplace
profiles.

Every integral over (0, inf) is split into a grid part and two analytic
pieces beyond the ends of the grid, where the integrand is modelled as a pure
power law.  Exponents are either declared by the caller or read off the two
outermost nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special as sp
from scipy.interpolate import make_interp_spline

__all__ = [
    "QuadratureGrid",
    "GriddedFunction",
    "LaplaceProfile",
    "QuadratureError",
    "CoverageError",
    "log_grid",
    "integrate",
    "integrate_from",
    "cumulative_tail",
    "cumulative_head",
    "laplace_of_density",
]


class QuadratureError(ArithmeticError):
    """An integral diverges at one of its ends or cannot be completed."""


class CoverageError(ValueError):
    """A requested point lies outside the region a routine can handle."""


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Log-uniform nodes with trapezoid weights in ``u = log x``.

    ``head_exponent`` a declares integrands ~ x^a near 0 and ``tail_exponent``
    b declares integrands ~ x^(-b) near infinity.  ``None`` means the
    exponent is fitted from the outermost nodes when needed.
    """

    nodes: np.ndarray
    weights: np.ndarray
    head_exponent: float | None = None
    tail_exponent: float | None = None

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 1 or x.size < 4:
            raise ValueError("a grid needs at least four nodes")
        if w.shape != x.shape:
            raise ValueError("weights and nodes differ in length")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        du = np.diff(np.log(x))
        if np.ptp(du) > 1e-9 * du.mean():
            raise ValueError("nodes must be log-uniform")
        if self.head_exponent is not None and self.head_exponent <= -1:
            raise QuadratureError("declared head exponent makes the integral diverge at 0")
        if self.tail_exponent is not None and self.tail_exponent <= 1:
            raise QuadratureError("declared tail exponent makes the integral diverge at infinity")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def u(self) -> np.ndarray:
        return np.log(self.nodes)

    @cached_property
    def h(self) -> float:
        return float((self.u[-1] - self.u[0]) / (self.size - 1))

    def with_exponents(self, head=None, tail=None) -> "QuadratureGrid":
        return QuadratureGrid(self.nodes, self.weights, head, tail)


def log_grid(x_min: float, x_max: float, n: int, head_exponent=None, tail_exponent=None) -> QuadratureGrid:
    """``n`` log-spaced nodes on [x_min, x_max] with trapezoid weights in log x."""
    if not 0 < x_min < x_max:
        raise ValueError("need 0 < x_min < x_max")
    x = np.geomspace(x_min, x_max, n)
    h = np.log(x_max / x_min) / (n - 1)
    w = h * x
    w[0] *= 0.5
    w[-1] *= 0.5
    return QuadratureGrid(x, w, head_exponent, tail_exponent)


@dataclass(frozen=True, eq=False)
class GriddedFunction:
    """Samples of a function on a grid plus optional power-law coefficients.

    When ``head_coeff`` (``tail_coeff``) is given the completion beyond the
    grid uses ``head_coeff * x**a`` (``tail_coeff * x**-b``) with the grid's
    declared exponents instead of matching the end node.
    """

    grid: QuadratureGrid
    values: np.ndarray
    head_coeff: float | None = None
    tail_coeff: float | None = None
    match_tol: float = 1e-2

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)
        g = self.grid
        if self.tail_coeff is not None:
            if g.tail_exponent is None:
                raise ValueError("tail_coeff needs a declared tail exponent")
            model = self.tail_coeff * g.x_max ** (-g.tail_exponent)
            if abs(v[-1] - model) > self.match_tol * abs(v[-1]):
                raise ValueError("tail coefficient does not match the last node")
        if self.head_coeff is not None:
            if g.head_exponent is None:
                raise ValueError("head_coeff needs a declared head exponent")
            model = self.head_coeff * g.x_min**g.head_exponent
            if abs(v[0] - model) > self.match_tol * abs(v[0]):
                raise ValueError("head coefficient does not match the first node")

    @classmethod
    def sample(cls, grid: QuadratureGrid, fn, **kw) -> "GriddedFunction":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float), **kw)


# -- power-law ends ---------------------------------------------------------


def _slope(y0, y1, h):
    """Log-slope between two samples; NaN where it is not defined."""
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    ok = (np.sign(y0) == np.sign(y1)) & (y0 != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.log(np.where(ok, y1 / np.where(ok, y0, 1.0), 1.0)) / h
    return np.where(ok, s, np.nan)


def _head_exponent(grid: QuadratureGrid, g) -> np.ndarray:
    """Exponent a with g ~ x^a at the left end (along the last axis)."""
    if grid.head_exponent is not None:
        return np.full(np.shape(g)[:-1], float(grid.head_exponent))
    return _slope(g[..., 0], g[..., 1], grid.h)


def _tail_exponent(grid: QuadratureGrid, g) -> np.ndarray:
    """Exponent b with g ~ x^(-b) at the right end (along the last axis)."""
    if grid.tail_exponent is not None:
        return np.full(np.shape(g)[:-1], float(grid.tail_exponent))
    return -_slope(g[..., -2], g[..., -1], grid.h)


def _head_piece(x0, g0, a, shift=0.0):
    """int_0^x0 g0 (x/x0)^a x^shift dx, zero where g0 = 0."""
    g0, a = np.broadcast_arrays(np.asarray(g0, dtype=float), np.asarray(a, dtype=float))
    c = a + shift + 1.0
    bad = (g0 != 0) & ~(c > 0)
    if np.any(bad):
        raise QuadratureError(f"integrand not integrable at 0 (exponent {np.min(a[bad] + shift):.4g})")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(g0 == 0, 0.0, g0 * x0 ** (shift + 1.0) / np.where(g0 == 0, 1.0, c))
    return out


def _tail_piece(x1, g1, b, shift=0.0):
    """int_x1^inf g1 (x/x1)^(-b) x^shift dx, zero where g1 = 0."""
    g1, b = np.broadcast_arrays(np.asarray(g1, dtype=float), np.asarray(b, dtype=float))
    c = b - shift - 1.0
    bad = (g1 != 0) & ~(c > 0)
    if np.any(bad):
        raise QuadratureError(f"integrand not integrable at infinity (decay {np.min(b[bad] - shift):.4g})")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(g1 == 0, 0.0, g1 * x1 ** (shift + 1.0) / np.where(g1 == 0, 1.0, c))
    return out


def _negligible_ends(grid: QuadratureGrid, g, a, b, shift: float = 0.0):
    """Validate end exponents of ``x^shift g``; drop unfittable ends that are noise.

    An end sample of ``x^(shift+1) g`` below 1e-13 of its largest value on the
    grid contributes nothing measurable and its piece is dropped; a larger
    end with an unusable exponent is an error.
    """
    xg = np.abs(g * grid.nodes ** (shift + 1.0))
    scale = xg.max(axis=-1)
    tiny0 = xg[..., 0] <= 1e-13 * scale
    tiny1 = xg[..., -1] <= 1e-13 * scale
    bad_a = ~np.isfinite(a) | ~(a + shift > -1.0)
    bad_b = ~np.isfinite(b) | ~(b - shift > 1.0)
    g0 = np.where(bad_a & tiny0, 0.0, g[..., 0])
    g1 = np.where(bad_b & tiny1, 0.0, g[..., -1])
    a = np.where(g0 == 0, 0.0, a)
    b = np.where(g1 == 0, shift + 2.0, b)
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise QuadratureError("cannot fit a power law at a grid end")
    return g0, g1, a, b


def trapezoid_with_ends(grid: QuadratureGrid, g, head=None, tail=None) -> np.ndarray:
    """Integral over (0, inf) of samples ``g`` along the last axis.

    Log-trapezoid on the grid, analytic power-law pieces beyond it, and the
    first Euler-Maclaurin end correction evaluated with the same power laws.
    """
    g = np.asarray(g, dtype=float)
    x0, x1, h = grid.x_min, grid.x_max, grid.h
    a = _head_exponent(grid, g) if head is None else np.broadcast_to(head, g.shape[:-1])
    b = _tail_exponent(grid, g) if tail is None else np.broadcast_to(tail, g.shape[:-1])
    g0, g1, a, b = _negligible_ends(grid, g, a, b)
    body = g @ grid.weights
    # trapezoid error on [u0, uN] is (h^2/12)(G'(uN) - G'(u0)) with G = x g
    em = (h * h / 12.0) * ((1.0 - b) * x1 * g1 - (a + 1.0) * x0 * g0)
    return body - em + _head_piece(x0, g0, a) + _tail_piece(x1, g1, b)


def _end_exponents(f: GriddedFunction):
    g = f.grid
    a = _head_exponent(g, f.values)
    b = _tail_exponent(g, f.values)
    a = 0.0 if f.values[0] == 0 else float(a)
    b = 2.0 if f.values[-1] == 0 else float(b)
    if np.isnan(a) or np.isnan(b):
        raise QuadratureError("cannot fit an end exponent; declare it on the grid")
    return a, b


def integrate(f: GriddedFunction) -> float:
    """int_0^inf f(x) dx with analytic completion beyond the grid."""
    g, v = f.grid, f.values
    if not np.any(v):
        return 0.0
    a, b = _end_exponents(f)
    total = float(trapezoid_with_ends(g, v, head=a, tail=b))
    if f.head_coeff is not None:
        total += f.head_coeff * g.x_min ** (a + 1.0) / (a + 1.0) - float(_head_piece(g.x_min, v[0], np.float64(a)))
    if f.tail_coeff is not None:
        total += f.tail_coeff * g.x_max ** (1.0 - b) / (b - 1.0) - float(_tail_piece(g.x_max, v[-1], np.float64(b)))
    return total


# -- cumulative integrals ---------------------------------------------------


def _spline_cumulative(grid: QuadratureGrid, G: np.ndarray, from_right: bool = False) -> np.ndarray:
    """Running integral of G du at every node (quintic spline in u).

    With ``from_right`` the result is ``int_{u_i}^{u_N} G du`` accumulated
    from the right end, so small tail values are not swamped by the head.
    """
    if from_right:
        t = -grid.u[::-1]
        anti = make_interp_spline(t, G[..., ::-1], k=5, axis=-1).antiderivative()
        return (anti(t) - anti(t[0]))[..., ::-1]
    anti = make_interp_spline(grid.u, G, k=5, axis=-1).antiderivative()
    return anti(grid.u) - anti(grid.u[0])


def cumulative_tail(grid: QuadratureGrid, g, k: float = 0.0, tail=None, truncate: bool = False):
    """``int_{x_i}^inf r^k g(r) dr`` at every node (``int_{x_i}^{x_max}`` with ``truncate``)."""
    g = np.asarray(g, dtype=float)
    if truncate:
        return _spline_cumulative(grid, grid.nodes ** (k + 1.0) * g, from_right=True)
    b = _tail_exponent(grid, g) if tail is None else np.broadcast_to(tail, g.shape[:-1])
    _, g1, _, b = _negligible_ends(grid, g, np.zeros(g.shape[:-1]), b, shift=k)
    piece = _tail_piece(grid.x_max, g1, b, shift=k)
    run = _spline_cumulative(grid, grid.nodes ** (k + 1.0) * g, from_right=True)
    return run + piece[..., None]


def cumulative_head(grid: QuadratureGrid, g, k: float = 0.0, head=None):
    """``int_0^{x_i} r^k g(r) dr`` at every node."""
    g = np.asarray(g, dtype=float)
    a = _head_exponent(grid, g) if head is None else np.broadcast_to(head, g.shape[:-1])
    g0, _, a, _ = _negligible_ends(grid, g, a, np.full(g.shape[:-1], k + 2.0), shift=k)
    piece = _head_piece(grid.x_min, g0, a, shift=k)
    return _spline_cumulative(grid, grid.nodes ** (k + 1.0) * g) + piece[..., None]


def _moment_from(f: GriddedFunction, q: float, k: float, a: float, b: float) -> float:
    """int_q^inf r^k f(r) dr."""
    g, v = f.grid, f.values
    spl = make_interp_spline(g.u, g.nodes ** (k + 1.0) * v, k=5).antiderivative()
    out = float(_tail_piece(g.x_max, v[-1], np.float64(b), shift=k))
    if q >= g.x_min:
        return out + float(spl(g.u[-1]) - spl(np.log(q)))
    out += float(spl(g.u[-1]) - spl(g.u[0]))
    if v[0] != 0:
        c = a + k + 1.0
        if q == 0 and not c > 0:
            raise QuadratureError("integrand not integrable at 0")
        out += v[0] * g.x_min ** (-a) * (g.x_min**c - q**c) / c
    return out


_WEIGHTS = {
    "1": ((0, 1.0, False),),
    "r-q": ((1, 1.0, False), (0, -1.0, True)),
    "(r-q)/r": ((0, 1.0, False), (-1, -1.0, True)),
    "1/r": ((-1, 1.0, False),),
}


def integrate_from(f: GriddedFunction, q: float, weight: str = "1") -> float:
    """``int_q^inf w(r, q) f(r) dr`` for w in {1, r-q, (r-q)/r, 1/r}."""
    if weight not in _WEIGHTS:
        raise ValueError(f"unknown weight {weight!r}")
    if q < 0:
        raise ValueError("q must be non-negative")
    if q > f.grid.x_max:
        raise CoverageError(f"q = {q} beyond the grid end {f.grid.x_max}")
    if not np.any(f.values):
        return 0.0
    a, b = _end_exponents(f)
    total = 0.0
    for k, c, times_q in _WEIGHTS[weight]:
        if times_q and q == 0:
            continue
        term = c * _moment_from(f, q, k, a, b)
        total += term * q if times_q else term
    return total


# -- Laplace transform of densities -----------------------------------------


def _lower_inc_gamma(s, z):
    """gamma(s, z) = int_0^z t^(s-1) e^-t dt for s > 0."""
    return sp.gammainc(s, z) * sp.gamma(s)


def _upper_inc_gamma(s, z):
    """Gamma(s, z) for real s (negative s via the downward recurrence)."""
    s = float(s)
    if s > 0:
        return sp.gammaincc(s, z) * sp.gamma(s)
    if s == 0:
        return sp.exp1(z)
    # Gamma(s, z) = (Gamma(s + 1, z) - z^s e^-z) / s
    return (_upper_inc_gamma(s + 1.0, z) - z**s * np.exp(-z)) / s


def laplace_of_density(f: GriddedFunction, q_grid: QuadratureGrid, rho: float | None = None) -> "LaplaceProfile":
    """Laplace transform F(q) = int f(x) e^(-qx) dx with F', F'' at the q nodes.

    The density grid must declare its head exponent a > -1 and tail decay
    b > 1.  Beyond the grid the density is continued by the matched power
    laws and integrated in closed form with incomplete Gamma functions.
    """
    g = f.grid
    a, b = g.head_exponent, g.tail_exponent
    if a is None or b is None:
        raise QuadratureError("laplace_of_density needs declared head and tail exponents")
    if a <= -1 or b <= 1:
        raise QuadratureError("inadmissible exponents for a finite measure")
    x, w, h = g.nodes, g.weights, g.h
    v = f.values
    q = q_grid.nodes
    c0 = f.head_coeff if f.head_coeff is not None else v[0] * g.x_min ** (-a)
    c1 = f.tail_coeff if f.tail_coeff is not None else v[-1] * g.x_max**b
    E = np.exp(-np.outer(q, x))

    def moment(m, qq, E):
        body = (E * (x**m * v)) @ w
        G0 = g.x_min ** (m + 1) * v[0] * E[:, 0]
        G1 = g.x_max ** (m + 1) * v[-1] * E[:, -1]
        em = (h * h / 12.0) * ((1.0 + m - b - qq * g.x_max) * G1 - (a + m + 1.0 - qq * g.x_min) * G0)
        s_h = a + m + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            head = np.where(
                qq > 0,
                c0 * np.where(qq > 0, qq, 1.0) ** (-s_h) * _lower_inc_gamma(s_h, qq * g.x_min),
                c0 * g.x_min**s_h / s_h,
            )
        s_t = m - b + 1.0
        tail = np.array([
            c1 * qi ** (-s_t) * _upper_inc_gamma(s_t, qi * g.x_max) if qi > 0 else c1 * g.x_max**s_t / (-s_t)
            for qi in np.atleast_1d(qq)
        ])
        return body - em + head + tail

    def drop_moment(qq):
        # int f (1 - e^-qx) dx, evaluated without forming F(0) - F(q)
        D = -np.expm1(-np.outer(qq, x))
        body = (D * v) @ w
        G0 = g.x_min * v[0] * D[:, 0]
        G1 = g.x_max * v[-1] * D[:, -1]
        dG0 = g.x_min * v[0] * (a + 1.0) * D[:, 0] + g.x_min * v[0] * qq * g.x_min * (1.0 - D[:, 0])
        dG1 = g.x_max * v[-1] * (1.0 - b) * D[:, -1] + g.x_max * v[-1] * qq * g.x_max * (1.0 - D[:, -1])
        em = (h * h / 12.0) * (dG1 - dG0)
        s_h = a + 1.0
        k = np.arange(1, 30)
        z0 = np.outer(qq, g.x_min ** np.ones(1))[:, 0] * g.x_min
        # head: c0 sum_k (-1)^(k+1) q^k x0^(a+1+k) / (k! (a+1+k)), fine while q x0 is small
        series = c0 * g.x_min**s_h * np.sum(
            (-1.0) ** (k + 1) * np.power.outer(z0, k) / (sp.factorial(k) * (s_h + k)), axis=1
        )
        closed = c0 * g.x_min**s_h / s_h - c0 * np.where(qq > 0, qq, 1.0) ** (-s_h) * _lower_inc_gamma(s_h, z0)
        head = np.where(z0 < 0.5, series, closed)
        s_t = 1.0 - b
        tail = np.array([
            c1 * g.x_max**s_t / (-s_t) - c1 * qi ** (-s_t) * _upper_inc_gamma(s_t, qi * g.x_max) if qi > 0 else 0.0
            for qi in np.atleast_1d(qq)
        ])
        return body - em + head + tail

    values = moment(0, q, E)
    d1 = -moment(1, q, E)
    d2 = moment(2, q, E)
    value0 = float(moment(0, np.zeros(1), np.ones((1, x.size)))[0])
    drop = drop_moment(q)
    return LaplaceProfile(q_grid, values, d1, d2, value0, rho if rho is not None else float(a + 1.0), drop)


# -- gridded Laplace-side functions -----------------------------------------


# tails below this multiple of q^(-rho-k) are treated as absent; _STEEP is
# the exponent used to continue them (numerically zero one decade later)
_TAIL_NOISE = 1e-9
_STEEP = 40.0


@dataclass(frozen=True, eq=False)
class LaplaceProfile:
    """A function G(q) on a q grid with G', G'', the value G(0) and the drop G(0) - G.

    The drop is stored separately because near q = 0 it is far smaller than
    G itself and every operator needs it without cancellation.  Off-grid
    evaluation uses quintic splines in ``log q``; beyond the grid ends the
    drop and each derivative are continued as power laws with exponents read
    off the two outermost nodes.
    """

    grid: QuadratureGrid
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    value0: float
    rho: float
    drop: np.ndarray | None = None

    def __post_init__(self):
        for name in ("values", "d1", "d2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.nodes.shape:
                raise ValueError(f"{name} does not match the grid")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.value0):
            raise ValueError("value at q = 0 must be finite")
        object.__setattr__(self, "value0", float(self.value0))
        drop = self.value0 - self.values if self.drop is None else np.asarray(self.drop, dtype=float)
        if drop.shape != self.values.shape or not np.all(np.isfinite(drop)):
            raise ValueError("drop does not match the grid")
        object.__setattr__(self, "drop", drop)

    # construction helpers
    @classmethod
    def from_functions(cls, grid, fn, fn1, fn2, value0, rho, drop=None) -> "LaplaceProfile":
        """Sample G, G', G'' (and optionally G(0) - G) given as callables."""
        q = grid.nodes
        return cls(grid, fn(q), fn1(q), fn2(q), value0, rho, None if drop is None else drop(q))

    @classmethod
    def zeros(cls, grid, rho) -> "LaplaceProfile":
        z = np.zeros(grid.size)
        return cls(grid, z, z, z, 0.0, rho)

    @property
    def q(self) -> np.ndarray:
        return self.grid.nodes

    def derivative(self, order: int) -> np.ndarray:
        return (self.values, self.d1, self.d2)[order]

    # arithmetic
    def _check(self, other):
        if other.grid is not self.grid and not np.array_equal(other.grid.nodes, self.grid.nodes):
            raise ValueError("profiles live on different grids")

    def __add__(self, other):
        if not isinstance(other, LaplaceProfile):
            return NotImplemented
        self._check(other)
        return LaplaceProfile(self.grid, self.values + other.values, self.d1 + other.d1,
                              self.d2 + other.d2, self.value0 + other.value0, self.rho,
                              self.drop + other.drop)

    def __sub__(self, other):
        if not isinstance(other, LaplaceProfile):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, c):
        c = float(c)
        return LaplaceProfile(self.grid, c * self.values, c * self.d1, c * self.d2,
                              c * self.value0, self.rho, c * self.drop)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    # evaluation
    @cached_property
    def _splines(self):
        u = self.grid.u
        return tuple(make_interp_spline(u, y, k=5) for y in (self.values, self.d1, self.d2, self.drop))

    @cached_property
    def _ends(self):
        """Power-law exponents (drop, G', G'') at the head and (G, G', G'') at the tail."""
        h = self.grid.h
        head, tail = [], []
        for k, y in enumerate((self.drop, self.d1, self.d2)):
            a = _slope(y[0], y[1], h)
            head.append(float(a) if np.isfinite(a) else (self.rho if k == 0 else self.rho - k))
        x1 = self.grid.x_max
        for k, y in enumerate((self.values, self.d1, self.d2)):
            b = -_slope(y[-2], y[-1], h)
            if k == 0 and y[-2] == y[-1] != 0:
                # levelled off exactly: continue as a constant
                tail.append(0.0)
                continue
            if max(abs(y[-2]), abs(y[-1])) <= _TAIL_NOISE * x1 ** (-self.rho - k) or b <= k:
                # far below the profile-class tail, or not decaying faster than
                # q^-k as a decaying profile must: roundoff, continue by zero
                b = _STEEP
            tail.append(float(b) if np.isfinite(b) else self.rho + k)
        return head, tail

    @property
    def decayed(self) -> bool:
        """True when G itself is below the roundoff floor at the grid end."""
        return self._ends[1][0] == _STEEP

    def drop_at(self, q):
        """G(0) - G(q) at arbitrary q >= 0."""
        q = np.asarray(q, dtype=float)
        out = np.empty(q.shape)
        g = self.grid
        lo = q < g.x_min
        hi = q > g.x_max
        mid = ~(lo | hi)
        if np.any(mid):
            out[mid] = self._splines[3](np.log(q[mid]))
        head, _ = self._ends
        if np.any(lo):
            out[lo] = self.drop[0] * (q[lo] / g.x_min) ** head[0]
        if np.any(hi):
            out[hi] = self.value0 - self(q[hi], 0)
        return out

    def __call__(self, q, order: int = 0):
        """Evaluate ``G^(order)`` at arbitrary q >= 0."""
        q = np.asarray(q, dtype=float)
        out = np.empty(q.shape)
        g = self.grid
        lo = q < g.x_min
        hi = q > g.x_max
        mid = ~(lo | hi)
        if np.any(mid):
            out[mid] = self._splines[order](np.log(q[mid]))
        head, tail = self._ends
        y = self.derivative(order)
        if np.any(lo):
            ql = q[lo]
            if order == 0:
                out[lo] = self.value0 - self.drop[0] * (ql / g.x_min) ** head[0]
            else:
                if np.any(ql <= 0):
                    raise CoverageError("derivatives are not available at q = 0")
                out[lo] = y[0] * (ql / g.x_min) ** head[order]
        if np.any(hi):
            out[hi] = y[-1] * (q[hi] / g.x_max) ** (-tail[order])
        return out

    def difference(self, z, r, order: int = 0):
        """``G^(order)(z) - G^(order)(z + r)`` without cancellation in the power-law ends."""
        z, r = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(r, dtype=float))
        if order == 0:
            out = self.drop_at(z + r) - self.drop_at(z)
        else:
            out = self(z, order) - self(z + r, order)
        head, tail = self._ends
        g = self.grid
        y = self.derivative(order)
        hi = z > g.x_max
        if np.any(hi):
            # c z^-b (1 - (1 + r/z)^-b)
            zz, rr = z[hi], r[hi]
            b = tail[order]
            out[hi] = y[-1] * (zz / g.x_max) ** (-b) * -np.expm1(-b * np.log1p(rr / zz))
        lo = (z + r < g.x_min) & (z > 0)
        if np.any(lo):
            zz, rr = z[lo], r[lo]
            a = head[order]
            base = -self.drop[0] if order == 0 else y[0]
            out[lo] = base * (zz / g.x_min) ** a * -np.expm1(a * np.log1p(rr / zz))
        return out

    def at_zero(self) -> float:
        return self.value0
