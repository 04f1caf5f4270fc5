from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatcoag.diagnostics import (
    BoundaryLayerPrediction,
    FitInstabilityError,
    MomentDivergenceError,
    beta_W,
    beta_W_fbar,
    beta_W_homogeneous,
    boundary_layer_report,
    distance_report,
    is_extension,
    kappa,
    moments,
    phi_big,
    phi_fbar,
    tail_normalization_check,
)
from fatcoag.grids import GriddedFunction, LaplaceProfile, log_grid
from fatcoag.kernels import power_law_kernel
from fatcoag.norms import weight
from fatcoag.operators import fbar_profile
from fatcoag.solver import rescale_profile
from fatcoag.special import eval_fbar, exact_moment

RHO, ALPHA = 0.7, 1.0 / 3.0
SPEC = power_law_kernel(ALPHA)
M_ALPHA = exact_moment(ALPHA, RHO)


@pytest.fixture(scope="module")
def Fb():
    return fbar_profile(log_grid(1e-12, 1e10, 1000), RHO)


@pytest.fixture(scope="module")
def fdens():
    xg = log_grid(1e-12, 1e8, 900, RHO - 1, 1 + RHO)
    return GriddedFunction.sample(xg, lambda x: eval_fbar(x, RHO))


@pytest.mark.parametrize("frac", [-0.5, -0.25, 0.0, 0.25, 0.5])
def test_moments_of_fbar(Fb, frac):
    g = frac * RHO
    assert moments(Fb, g) == pytest.approx(exact_moment(g, RHO), rel=1e-6)
    assert is_extension(g) == (g < 0)


def test_moment_examples(Fb):
    assert moments(Fb, 0.0) == RHO
    assert moments(Fb, 0.35) == pytest.approx(exact_moment(0.35, RHO), abs=1e-6)


@pytest.mark.parametrize("g", [0.7, -0.7, 0.8])
def test_moment_domain(Fb, g):
    with pytest.raises(MomentDivergenceError):
        moments(Fb, g)


def test_beta_W_asymptote(fdens):
    x = 1e-4
    assert x**ALPHA * beta_W(x, fdens, SPEC) == pytest.approx(SPEC.C_W * M_ALPHA, rel=1e-2)
    assert x**ALPHA * beta_W_fbar(x, RHO, ALPHA) == pytest.approx(M_ALPHA, rel=1e-2)


def test_beta_W_quadrature_matches_closed_form(fdens):
    x = np.geomspace(1e-6, 1e3, 12)
    assert np.allclose(beta_W(x, fdens, SPEC), beta_W_fbar(x, RHO, ALPHA), rtol=1e-6)


def test_beta_W_homogeneous_rewrite(fdens):
    x = np.geomspace(1e-6, 1e3, 12)
    assert np.allclose(beta_W_homogeneous(x, fdens, SPEC), beta_W(x, fdens, SPEC), rtol=1e-10, atol=0)


@pytest.mark.parametrize("eps", [0.01, 0.02, 0.1])
def test_phi_asymptote(fdens, eps):
    x = 1e-4
    assert x**ALPHA * phi_big(x, fdens, SPEC, eps) == pytest.approx(eps * SPEC.C_W * M_ALPHA / ALPHA, rel=1e-2)
    assert x**ALPHA * phi_fbar(x, RHO, ALPHA, eps) == pytest.approx(eps * M_ALPHA / ALPHA, rel=1e-2)


def test_phi_quadrature_matches_closed_form(fdens):
    x = np.geomspace(1e-6, 10.0, 10)
    assert np.allclose(phi_big(x, fdens, SPEC, 0.02), phi_fbar(x, RHO, ALPHA, 0.02), rtol=1e-6)


def test_phi_monotone_and_vanishing():
    x = np.geomspace(1e-8, 60.0, 300)
    P = phi_fbar(x, RHO, ALPHA, 0.02)
    assert np.all(np.diff(P) <= 0)
    assert P[-1] < 1e-25


def test_weighted_bounds():
    x = np.geomspace(1e-8, 1e4, 400)
    # beta_W grows like x^alpha at infinity, so its weight is x^-alpha near 0 and x^alpha beyond 1
    b = beta_W_fbar(x, RHO, ALPHA) / (weight(-ALPHA, 0.0, x) * weight(0.0, -ALPHA, x))
    p = phi_fbar(x, RHO, ALPHA, 0.02) / (0.02 * weight(-ALPHA, 1 - ALPHA, x))
    assert np.max(b) < 10 and np.max(p) < 10
    assert b[0] == pytest.approx(b[1], rel=1e-2)


def test_zero_density():
    xg = log_grid(1e-6, 1e4, 100, RHO - 1, 1 + RHO)
    z = GriddedFunction(xg, np.zeros(100))
    assert beta_W(0.5, z, SPEC) == 0.0
    assert phi_big(0.5, z, SPEC, 0.02) == 0.0


def test_beta_W_needs_exponents():
    with pytest.raises(ValueError):
        beta_W(1.0, GriddedFunction.sample(log_grid(1e-6, 1e4, 50), lambda x: np.exp(-x)), SPEC)


def test_kappa(Fb):
    assert kappa(Fb) == 0.0
    shifted = LaplaceProfile(Fb.grid, Fb.values - 0.01, Fb.d1, Fb.d2, Fb.value0 - 0.01, RHO, Fb.drop)
    assert kappa(shifted) == pytest.approx(-0.02, abs=1e-15)
    assert kappa(shifted) == pytest.approx(2 * moments(shifted, 0.0) - 2 * RHO, abs=1e-10)


def test_tail_normalization_fbar(Fb):
    assert tail_normalization_check(Fb) == pytest.approx(RHO**2, abs=1e-4)


@pytest.mark.parametrize("a", [2.0, 0.5])
def test_tail_normalization_detects_rescaling(Fb, a):
    c = tail_normalization_check(rescale_profile(Fb, a))
    assert c == pytest.approx(a**-RHO * RHO**2, rel=1e-4)
    assert abs(c / RHO**2 - 1) > 0.2


def test_tail_normalization_instability():
    g = log_grid(1e-3, 1e3, 200)
    q = g.nodes
    # q^(1-rho) (-G') = 1 + 2000 q varies strongly over the first decade
    G = LaplaceProfile(g, np.zeros(200), -(q ** (RHO - 1)) * (1 + 2000 * q), np.zeros(200), 0.0, RHO)
    with pytest.raises(FitInstabilityError):
        tail_normalization_check(G)


def test_boundary_layer_unperturbed(Fb):
    p = boundary_layer_report(Fb, SPEC, 0.0)
    assert not p.has_layer and p.layer_scale is None
    assert p.exponent == pytest.approx(RHO - 1, abs=1e-12)
    x = np.array([1e-3, 1.0])
    assert np.allclose(p.predictor(x), x ** (RHO - 1 + kappa(Fb)), rtol=1e-12)


def test_boundary_layer_scale(Fb):
    p = boundary_layer_report(Fb, SPEC, 0.02)
    assert p.has_layer
    assert p.layer_scale == pytest.approx(8e-6, rel=1e-12)
    x = 1e-3
    want = x ** (RHO - 1) * np.exp(-(0.02 / ALPHA) * M_ALPHA * x**-ALPHA)
    assert p.predictor(x) == pytest.approx(want, rel=1e-6)
    assert set(p.to_dict()) == {"m0", "m_alpha", "exponent", "layer_scale", "has_layer"}


@settings(max_examples=20)
@given(st.floats(0.5, 0.9), st.just(0.0) | st.floats(1e-6, 0.2))
def test_prediction_record_invariants(m0, eps):
    p = BoundaryLayerPrediction(m0, 0.7, RHO, ALPHA, eps)
    assert p.exponent == pytest.approx(2 * m0 - 1 - RHO)
    assert (p.layer_scale is None) == (eps == 0) and (p.layer_scale is None or p.layer_scale > 0)


def test_prediction_validation():
    with pytest.raises(ValueError):
        BoundaryLayerPrediction(0.7, 0.7, RHO, ALPHA, -0.1)
    with pytest.raises(ValueError):
        BoundaryLayerPrediction(0.7, 0.7, RHO, 0.0, 0.1)


def test_distance_report(Fb):
    d = distance_report(Fb, Fb, 0.15, 0.4)
    assert d == {"norm_distance": 0.0, "sup_distance": 0.0, "kappa": 0.0}


def test_diagnostics_are_pure(Fb):
    a = boundary_layer_report(Fb, SPEC, 0.02).to_dict()
    b = boundary_layer_report(Fb, SPEC, 0.02).to_dict()
    assert a == b
