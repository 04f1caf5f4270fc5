from __future__ import annotations

import numpy as np
import pytest

from conftest import ALPHA, LADDER, RHO
from fatcoag.diagnostics import moments, tail_normalization_check
from fatcoag.norms import full_norm
from fatcoag.operators import KernelQuadrature, fbar_profile, one_minus_zeta, op_P, selfsim_residual, shift
from fatcoag.solver import (
    NonContractionError,
    SolverConfig,
    SolverReport,
    rescale_profile,
    residual_Qode,
    solve_profile,
)
from fatcoag.special import eval_Qbar, exact_moment


@pytest.mark.parametrize(
    "kw,match",
    [
        (dict(rho=0.5, alpha=0.2), "rho"),
        (dict(rho=0.7, alpha=0.5), "alpha"),
        (dict(rho=0.7, alpha=0.0), "alpha"),
        (dict(rho=0.7, alpha=0.3, epsilon=0.2), "epsilon"),
        (dict(rho=0.7, alpha=0.3, epsilon=-0.01), "epsilon"),
        (dict(rho=0.7, alpha=0.3, theta=0.25), "theta"),
        (dict(rho=0.7, alpha=0.3, theta=0.5), "theta"),
        (dict(rho=0.7, alpha=0.3, mu=0.35), "mu"),
        (dict(rho=0.7, alpha=0.3, damping=0.0), "damping"),
        (dict(rho=0.7, alpha=0.3, scheme="newton"), "scheme"),
        (dict(rho=0.7, alpha=0.3, q_nodes=8), "grid"),
    ],
)
def test_config_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        SolverConfig(**kw)


def test_config_cap_can_be_raised():
    assert SolverConfig(0.7, ALPHA, 0.5, epsilon_cap=1.0).epsilon == 0.5


def test_config_defaults():
    cfg = SolverConfig(0.7, ALPHA)
    assert max(ALPHA, 0.3) < cfg.theta < 0.5
    assert 0 < cfg.mu < 0.3
    assert cfg.damping == 0.7


def test_unperturbed_solve_is_one_step():
    cfg = SolverConfig(RHO, ALPHA, 0.0)
    F, rep = solve_profile(cfg)
    assert rep.converged and rep.iterations == 1
    Fb = fbar_profile(cfg.q_grid(), RHO)
    assert np.array_equal(F.values, Fb.values) and F.value0 == Fb.value0
    assert rep.kappa == 0.0 and rep.sup_distance == 0.0 and rep.norm_distance == 0.0


def test_Qode_residual_of_fbar():
    cfg = SolverConfig(RHO, ALPHA)
    Fb = fbar_profile(cfg.q_grid(), RHO)
    assert residual_Qode(Fb) < 1e-12
    kq = cfg.kernel_quadrature()
    # with eps > 0 the explicit profile leaves exactly eps P behind
    assert residual_Qode(Fb, 0.02, kq) == pytest.approx(0.02 * float(np.max(op_P(Fb, kq))), rel=1e-12)
    assert residual_Qode(Fb, 0.02, kq) > 1e-3
    with pytest.raises(ValueError):
        residual_Qode(Fb, 0.02)


def test_rescale_identity_and_domain():
    Fb = fbar_profile(SolverConfig(RHO, ALPHA).q_grid(), RHO)
    assert rescale_profile(Fb, 1.0) is Fb
    with pytest.raises(ValueError):
        rescale_profile(Fb, 0.0)


def test_large_epsilon_does_not_contract():
    with pytest.raises(NonContractionError) as info:
        solve_profile(SolverConfig(RHO, ALPHA, 0.5, epsilon_cap=1.0))
    assert "ratio" in str(info.value)
    assert info.value.iteration >= 2


def test_plain_iteration_diverges():
    with pytest.raises(NonContractionError):
        solve_profile(SolverConfig(RHO, ALPHA, 0.05, scheme="plain", max_iter=20))


def test_noncontraction_message():
    err = NonContractionError(1.7, 5, 0.9, "boom")
    assert err.ratio == 1.7 and err.iteration == 5
    assert "1.7" in str(err) and "boom" in str(err)


@pytest.mark.parametrize("eps", LADDER)
def test_converges_geometrically(solved, eps):
    _, F, rep, _ = solved[eps]
    assert isinstance(rep, SolverReport)
    assert rep.converged
    assert len(rep.ratios) >= 5 and max(rep.ratios) < 1
    assert rep.residual_selfsim < 1e-5


@pytest.mark.parametrize("eps", LADDER)
def test_Qode_independent_check(solved, eps):
    cfg, F, rep, _ = solved[eps]
    assert rep.residual_Qode < 1e-5
    assert residual_Qode(F, eps, cfg.kernel_quadrature()) == pytest.approx(rep.residual_Qode, rel=1e-12)


@pytest.mark.parametrize("eps", LADDER)
def test_apriori_bounds(solved, eps):
    _, F, _, _ = solved[eps]
    q = F.q
    Q = F.drop
    # Q levels off at F(0) for large q, where its differences are roundoff
    assert np.all(Q >= -1e-15) and np.all(np.diff(Q) >= -1e-12)
    assert np.all(Q <= eval_Qbar(q, RHO) + 1e-12)
    assert np.max(q ** (1 - RHO) * -F.d1) <= 1.01 * RHO**2
    assert F.value0 <= RHO
    assert np.all(np.diff(F.values) <= 1e-12) and 0 < F.value0 < 1


@pytest.mark.parametrize("eps", LADDER)
def test_moments_and_kappa(solved, eps):
    _, F, rep, _ = solved[eps]
    for g in np.linspace(-RHO + 0.05, RHO - 0.05, 7):
        assert np.isfinite(moments(F, g)) and moments(F, g) > 0
    assert moments(F, ALPHA) >= exact_moment(ALPHA, RHO) / 2
    assert abs(rep.kappa) <= 2 * rep.sup_distance
    if eps <= 0.02:
        assert abs(rep.kappa) < 0.1


@pytest.mark.parametrize("eps", LADDER)
def test_tail_normalization_preserved(solved, eps):
    _, F, _, _ = solved[eps]
    assert tail_normalization_check(F) == pytest.approx(RHO**2, rel=2e-2)


@pytest.mark.parametrize("eps", LADDER)
def test_shift_stability_on_outputs(solved, eps):
    cfg, F, _, _ = solved[eps]
    for mu in (0.0, cfg.mu):
        n = full_norm(F, 2, mu, cfg.theta)
        assert full_norm(shift(F, 1.0), 2, mu, cfg.theta) <= n
        assert full_norm(one_minus_zeta(F), 2, mu, cfg.theta) <= 2 * n


def test_trends_along_ladder(solved):
    reps = [solved[e][2] for e in LADDER]
    for key in ("norm_distance", "sup_distance"):
        vals = [getattr(r, key) for r in reps]
        assert vals[0] > vals[1] > vals[2], key
    k = [abs(r.kappa) for r in reps]
    assert k[0] > k[1] > k[2]


def test_rescaled_output_keeps_residual(solved):
    cfg, F, rep, _ = solved[0.02]
    kq = cfg.kernel_quadrature()
    Fa = rescale_profile(F, 2.0)
    r = selfsim_residual(Fa, 0.02, kq, truncate=True)
    res = max(float(np.max(np.abs(r.values))), abs(r.value0))
    assert res <= 2 * rep.residual_selfsim + 1e-9
