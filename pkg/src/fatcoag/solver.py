"""Fixed-point computation of the perturbed self-similar profile.

With F = Fbar + M the Laplace-side equation
``F - A(F) - B2(F, F) - eps B_W(F, F) = 0`` becomes

    M = T(M) = LL^-1[B2(M, M) + eps B_W(Fbar + M, Fbar + M)].

Two schemes solve it.  ``plain`` is the damped iteration
``M <- M + d (T(M) - M)`` from M = 0.  For power-law W it stalls: the
perturbation removes the fat tail of f near x = 0, so M approaches -Fbar
for q beyond eps^(-1/a), and the linearization of T has multipliers of
size eps q^a there.  ``preconditioned`` starts from the boundary-layer
shape f = fbar exp(-Phi(x, fbar)) and scales every step by
1/(1 + g eps q^a), with the gain g read off one directional derivative
of T.  Both share the fixed point.

The first-order ODE for Q = F(0) - F is never used inside the iteration
and serves as an independent residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import phi_fbar
from .grids import (
    CoverageError,
    GriddedFunction,
    LaplaceProfile,
    QuadratureError,
    QuadratureGrid,
    laplace_of_density,
    log_grid,
)
from .kernels import KernelSpec, power_law_kernel
from .linop import apply_LLinv
from .norms import default_mu, default_theta, full_norm, mu_star
from .special import eval_fbar
from .operators import (
    KernelQuadrature,
    fbar_profile,
    op_B2,
    op_BW,
    op_P,
    selfsim_residual,
)

__all__ = [
    "SolverConfig",
    "SolverReport",
    "NonContractionError",
    "solve_profile",
    "residual_Qode",
    "rescale_profile",
    "profile_grid",
    "initial_guess",
    "estimate_gain",
    "SCHEMES",
]

SCHEMES = ("preconditioned", "plain")


class NonContractionError(RuntimeError):
    """The damped iteration stopped contracting.

    ``ratio`` is infinite when the map could not be evaluated at the
    iterate, which then carries the last finite ratio and the reason.
    """

    def __init__(self, ratio: float, iteration: int, last_ratio: float | None = None, reason: str = ""):
        msg = f"iteration does not contract: ratio {ratio:.4g} at iteration {iteration}"
        if last_ratio is not None:
            msg += f" (last finite ratio {last_ratio:.4g})"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.ratio = ratio
        self.iteration = iteration
        self.last_ratio = last_ratio
        self.reason = reason


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one solve.

    ``theta`` and ``mu`` default to the midpoint of (max(alpha, 1-rho), 1/2)
    and to half of min(rho, 1-rho).  The iteration stops once a damped step
    is below ``step_tol`` in the (2, 0, theta) norm; ``tol`` bounds the
    self-similar residual required to call the result converged.  Epsilon
    above ``epsilon_cap`` is rejected; the cap may be raised explicitly.
    ``gain`` fixes the preconditioner gain instead of estimating it.  The
    x grid carries the density of the initial guess.
    """

    rho: float
    alpha: float
    epsilon: float = 0.0
    theta: float | None = None
    mu: float | None = None
    damping: float = 0.7
    tol: float = 1e-5
    step_tol: float = 1e-8
    max_iter: int = 120
    epsilon_cap: float = 0.1
    scheme: str = "preconditioned"
    gain: float | None = None
    q_min: float = 1e-12
    q_max: float = 1e10
    q_nodes: int = 1000
    z_min: float = 1e-16
    z_max: float = 1e12
    z_nodes: int = 700
    x_min: float = 1e-13
    x_max: float = 1e5
    x_nodes: int = 900

    def __post_init__(self):
        if not 0.5 < self.rho < 1.0:
            raise ValueError(f"rho out of (1/2,1): {self.rho}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha out of (0,1/2): {self.alpha}")
        if not self.alpha < self.rho:
            raise ValueError("alpha must be below rho")
        if not 0.0 <= self.epsilon <= self.epsilon_cap:
            raise ValueError(f"epsilon out of [0, {self.epsilon_cap}]: {self.epsilon}")
        lo = max(self.alpha, 1.0 - self.rho)
        if self.theta is None:
            object.__setattr__(self, "theta", default_theta(self.alpha, self.rho))
        if not lo < self.theta < 0.5:
            raise ValueError(f"theta out of ({lo}, 1/2): {self.theta}")
        if self.mu is None:
            object.__setattr__(self, "mu", default_mu(self.rho))
        if not 0.0 < self.mu < mu_star(self.rho):
            raise ValueError(f"mu out of (0, {mu_star(self.rho)}): {self.mu}")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping out of (0,1]: {self.damping}")
        if not (self.tol > 0 and self.step_tol > 0 and self.max_iter >= 1):
            raise ValueError("tolerances must be positive and max_iter at least 1")
        if not (0 < self.q_min < self.q_max and self.q_nodes >= 16):
            raise ValueError("invalid q grid")
        if not (0 < self.z_min < self.z_max and self.z_nodes >= 16):
            raise ValueError("invalid kernel grid")
        if not (0 < self.x_min < self.x_max and self.x_nodes >= 16):
            raise ValueError("invalid density grid")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}: {self.scheme!r}")
        if self.gain is not None and not self.gain >= 0:
            raise ValueError("gain must be non-negative")

    def q_grid(self) -> QuadratureGrid:
        return log_grid(self.q_min, self.q_max, self.q_nodes)

    def kernel(self) -> KernelSpec:
        return power_law_kernel(self.alpha)

    def kernel_quadrature(self) -> KernelQuadrature:
        return KernelQuadrature(self.kernel(), log_grid(self.z_min, self.z_max, self.z_nodes))


@dataclass(frozen=True)
class SolverReport:
    """Outcome of :func:`solve_profile`.

    ``iterates`` holds the (2, 0, theta) norm of every damped step over
    the grid interval and ``ratios`` the quotients of successive steps.
    """

    iterates: tuple[float, ...]
    ratios: tuple[float, ...]
    residual_selfsim: float
    residual_Qode: float
    kappa: float
    norm_distance: float
    sup_distance: float
    converged: bool
    iterations: int
    epsilon: float
    scheme: str = "preconditioned"
    gain: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "scheme": self.scheme,
            "gain": self.gain,
            "converged": self.converged,
            "iterations": self.iterations,
            "iterates": list(self.iterates),
            "ratios": list(self.ratios),
            "residual_selfsim": self.residual_selfsim,
            "residual_Qode": self.residual_Qode,
            "kappa": self.kappa,
            "norm_distance": self.norm_distance,
            "sup_distance": self.sup_distance,
        }


def profile_grid(q_min: float = 1e-12, q_max: float = 1e10, n: int = 1000) -> QuadratureGrid:
    return log_grid(q_min, q_max, n)


def residual_Qode(F: LaplaceProfile, eps: float = 0.0, kq: KernelQuadrature | None = None) -> float:
    """sup_q | -q Q' + rho Q - Q^2 - eps P | with Q = F(0) - F."""
    q = F.q
    Q = F.drop
    r = q * F.d1 + F.rho * Q - Q * Q
    if eps != 0.0:
        if kq is None:
            raise ValueError("a kernel quadrature is needed when eps != 0")
        r = r - eps * op_P(F, kq)
    return float(np.max(np.abs(r)))


def rescale_profile(F: LaplaceProfile, a: float) -> LaplaceProfile:
    """F_a(q) = F(q/a), the Laplace side of f_a(x) = a f(a x)."""
    if not a > 0:
        raise ValueError("scale must be positive")
    if a == 1.0:
        return F
    p = F.q / a
    return LaplaceProfile(F.grid, F(p, 0), F(p, 1) / a, F(p, 2) / a**2, F.value0, F.rho, F.drop_at(p))


def initial_guess(cfg: SolverConfig, Fbar: LaplaceProfile) -> LaplaceProfile:
    """M0 = L[fbar exp(-Phi(x, fbar))] - Fbar, or zero for eps = 0."""
    if cfg.epsilon == 0.0:
        return LaplaceProfile.zeros(Fbar.grid, cfg.rho)
    rho = cfg.rho
    xg = log_grid(cfg.x_min, cfg.x_max, cfg.x_nodes, rho - 1.0, 1.0 + rho)
    x = xg.nodes
    f0 = eval_fbar(x, rho) * np.exp(-phi_fbar(x, rho, cfg.alpha, cfg.epsilon))
    return laplace_of_density(GriddedFunction(xg, f0), Fbar.grid, rho) - Fbar


def _precondition(P: LaplaceProfile, D: np.ndarray) -> LaplaceProfile:
    """Scale P by D node-wise with D(0) = 1, keeping drop = value0 - values."""
    return LaplaceProfile(P.grid, D * P.values, D * P.d1, D * P.d2, P.value0, P.rho,
                          D * P.drop + (1.0 - D) * P.value0)


# the gain is fitted where eps q^a dominates; below this q the map is nearly a contraction already
_GAIN_WINDOW = 1e3


def estimate_gain(T, M: LaplaceProfile, eps: float, alpha: float, h: float = 1e-4) -> float:
    """Median of -lambda / (eps q^a) for q > 1e3, where lambda(q) is the
    node-wise ratio of DT(M)[v] to v along the residual v = T(M) - M."""
    v = T(M) - M
    Jv = (T(M + h * v) - T(M - h * v)) * (0.5 / h)
    q = M.q
    sel = (q > _GAIN_WINDOW) & (v.d2 != 0)
    if not np.any(sel):
        return 0.0
    lam = Jv.d2[sel] / v.d2[sel]
    g = np.median(np.maximum(-lam, 0.0) / (eps * q[sel] ** alpha))
    return float(g) if np.isfinite(g) else 0.0


def solve_profile(cfg: SolverConfig, progress=None) -> tuple[LaplaceProfile, SolverReport]:
    """Damped fixed-point iteration on M = F - Fbar.

    ``progress``, when given, is called with (iteration, step norm) after
    every step.  Three successive step ratios >= 1 raise
    :class:`NonContractionError`, and so does an iterate at which T can no
    longer be evaluated (it has left the class the operators act on).
    Quadrature failures at the starting point propagate unchanged.
    """
    grid = cfg.q_grid()
    q = grid.nodes
    rho, eps, d = cfg.rho, cfg.epsilon, cfg.damping
    Fbar = fbar_profile(grid, rho)
    kq = cfg.kernel_quadrature() if eps > 0 else None
    # the preconditioned scheme starts from a profile that has decayed at the
    # grid end, and integrals are not continued beyond it
    truncate = True if cfg.scheme == "preconditioned" and eps > 0 else None

    def T(M):
        H = op_B2(M, M)
        if eps > 0:
            F = Fbar + M
            H = H + eps * op_BW(F, F, kq, truncate)
        return apply_LLinv(H)

    if cfg.scheme == "plain":
        M = LaplaceProfile.zeros(grid, rho)
        gain = 0.0
    else:
        M = initial_guess(cfg, Fbar)
        if cfg.gain is not None:
            gain = cfg.gain
        else:
            gain = estimate_gain(T, M, eps, cfg.alpha) if eps > 0 else 0.0
    D = 1.0 / (1.0 + gain * eps * q**cfg.alpha)
    steps: list[float] = []
    ratios: list[float] = []
    bad = 0
    for n in range(1, cfg.max_iter + 1):
        try:
            TM = T(M)
        except (QuadratureError, CoverageError) as exc:
            if n == 1:
                raise
            raise NonContractionError(float("inf"), n, ratios[-1] if ratios else None, str(exc)) from exc
        step = d * _precondition(TM - M, D)
        M = M + step
        size = full_norm(step, 2, 0.0, cfg.theta, extend=False)
        steps.append(size)
        if progress is not None:
            progress(n, size)
        if len(steps) > 1 and steps[-2] > 0:
            ratios.append(size / steps[-2])
            bad = bad + 1 if ratios[-1] >= 1.0 else 0
            if bad >= 3:
                raise NonContractionError(ratios[-1], n)
        if size <= cfg.step_tol:
            break
    F = Fbar + M
    res = selfsim_residual(F, eps, kq, truncate)
    res_sup = float(max(np.max(np.abs(res.values)), abs(res.value0)))
    res_q = residual_Qode(F, eps, kq)
    contracting = all(r < 1.0 for r in ratios[-3:])
    report = SolverReport(
        iterates=tuple(steps),
        ratios=tuple(ratios),
        residual_selfsim=res_sup,
        residual_Qode=res_q,
        kappa=2.0 * M.value0,
        norm_distance=full_norm(M, 2, cfg.mu, cfg.theta),
        sup_distance=float(max(np.max(np.abs(M.values)), abs(M.value0))),
        converged=bool(res_sup < cfg.tol and steps[-1] <= cfg.step_tol and contracting),
        iterations=len(steps),
        epsilon=eps,
        scheme=cfg.scheme,
        gain=gain,
    )
    return F, report
