from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fatcoag.kernels import (
    HypothesisError,
    ker_integral_bounds_probe,
    ker_regular,
    phi_explicit,
    phi_plemelj,
    power_law_kernel,
    verify_laplace_identity,
)
from fatcoag.norms import weight

A = 1.0 / 3.0
pos = st.floats(-4, 4).map(lambda t: 10.0**t)


def _plemelj_oracle(s, alpha, nu=mp.mpf("1e-30")):
    mp.mp.dps = 50
    W = lambda z: z**alpha + z ** (-alpha)
    val = (W(-s - 1j * nu) - W(-s + 1j * nu)) / (2j * mp.pi * (1 - s))
    mp.mp.dps = 15
    return float(mp.re(val))


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_alpha_gate(alpha):
    with pytest.raises(ValueError, match=r"alpha out of \(0,1\)"):
        power_law_kernel(alpha)


def test_spec_constants():
    spec = power_law_kernel(A)
    assert spec.W_minus_one == pytest.approx(2 * math.cos(math.pi * A), rel=1e-14)
    assert spec.delta_coeff == spec.W_minus_one
    assert spec.C_W == 1.0


@given(pos, pos, pos)
def test_W_symmetric_homogeneous_bounded(x, y, lam):
    spec = power_law_kernel(A)
    w = spec.eval_W(x, y)
    assert w == pytest.approx(spec.eval_W(y, x), rel=1e-14)
    assert w == pytest.approx(spec.eval_W(lam * x, lam * y), rel=1e-12)
    assert 0 <= w <= (x / y) ** A + (y / x) ** A + 1e-12 * w


def test_phi_at_two():
    spec = power_law_kernel(A)
    assert phi_plemelj(2.0, spec) == pytest.approx(0.12852, abs=1e-5)
    assert phi_plemelj(2.0, spec) == pytest.approx(_plemelj_oracle(2.0, A), abs=1e-8)


def test_phi_at_one():
    spec = power_law_kernel(A)
    want = 2 * A * math.sin(math.pi * A) / math.pi
    assert want == pytest.approx(0.18378, abs=1e-5)
    assert phi_plemelj(1.0, spec) == pytest.approx(want, abs=1e-10)
    assert phi_explicit(1.0, A) == pytest.approx(want, abs=1e-15)
    side = 0.5 * (phi_explicit(1 + 1e-6, A) + phi_explicit(1 - 1e-6, A))
    assert side == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.2, A, 0.45])
def test_plemelj_equals_explicit(alpha):
    spec = power_law_kernel(alpha)
    s = np.geomspace(1e-3, 1e3, 50)
    assert np.max(np.abs(phi_plemelj(s, spec) - phi_explicit(s, alpha))) < 1e-12


@pytest.mark.parametrize("s", [0.01, 0.5, 3.0, 250.0])
def test_plemelj_against_mpmath(s):
    assert phi_plemelj(s, power_law_kernel(0.45)) == pytest.approx(_plemelj_oracle(s, 0.45), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.2, A, 0.45])
def test_phi_decay_bound(alpha):
    s = np.geomspace(1e-4, 1e4, 400)
    ratio = np.abs(phi_explicit(s, alpha)) / weight(-alpha, 1 - alpha, s)
    # bounded by a constant; the ratio levels off at both ends
    assert np.max(ratio) < 1.0
    assert ratio[0] == pytest.approx(ratio[1], rel=1e-2) and ratio[-1] == pytest.approx(ratio[-2], rel=1e-2)


def test_ker_regular_values():
    spec = power_law_kernel(A)
    assert ker_regular(2.0, 1.0, spec) == pytest.approx(phi_plemelj(0.5, spec) / 2, rel=1e-14)
    closed = math.sin(math.pi * A) / math.pi * (2**A - 2**-A)
    assert ker_regular(2.0, 1.0, spec) == pytest.approx(closed, rel=1e-14)
    assert closed == pytest.approx(0.128520, abs=1e-6)
    assert ker_regular(1.0, 1.0, spec) == pytest.approx(2 * A * math.sin(math.pi * A) / math.pi, rel=1e-14)


@given(pos, pos)
def test_ker_regular_matches_closed_form(xi, eta):
    spec = power_law_kernel(A)
    if abs(xi - eta) < 1e-3 * (xi + eta):
        return
    closed = math.sin(math.pi * A) / math.pi * ((xi / eta) ** A - (eta / xi) ** A) / (xi - eta)
    assert ker_regular(xi, eta, spec) == pytest.approx(closed, rel=1e-12)


@given(pos, pos, pos)
def test_ker_homogeneous_symmetric(xi, eta, lam):
    spec = power_law_kernel(A)
    k = ker_regular(xi, eta, spec)
    assert ker_regular(2 * xi, 2 * eta, spec) == pytest.approx(k / 2, rel=1e-14)
    assert ker_regular(lam * xi, lam * eta, spec) == pytest.approx(k / lam, rel=1e-12)
    assert ker_regular(eta, xi, spec) == pytest.approx(k, rel=1e-12)


def test_ker_growth_bound():
    spec = power_law_kernel(A)
    x = np.geomspace(1e-5, 1e5, 81)
    xi, eta = np.meshgrid(x, x)
    bound = (xi + eta) ** (A - 1) * (xi**-A + eta**-A)
    assert np.max(np.abs(ker_regular(xi, eta, spec)) / bound) < 1.0


@pytest.mark.parametrize("x,y,target", [(1.0, 1.0, 1.0), (2.0, 1.0, (2 ** (1 / 3) + 2 ** (-1 / 3)) / 3)])
def test_laplace_identity_examples(x, y, target):
    spec = power_law_kernel(A)
    assert float(spec.eval_W(x, y)) / (x + y) == pytest.approx(target, rel=1e-14)
    assert abs(verify_laplace_identity(x, y, spec)) < 1e-4


def test_laplace_identity_symmetric():
    spec = power_law_kernel(A)
    assert verify_laplace_identity(3.0, 0.2, spec) == pytest.approx(verify_laplace_identity(0.2, 3.0, spec), abs=1e-12)


def test_probe_refinement_stable():
    spec = power_law_kernel(A)
    coarse = ker_integral_bounds_probe(spec, 0.0, 1.0, 0.0, 1.0, n=400)
    fine = ker_integral_bounds_probe(spec, 0.0, 1.0, 0.0, 1.0, n=800)
    assert np.isfinite(fine) and abs(fine / coarse - 1) < 1e-2


def test_probe_theta_exponents():
    spec = power_law_kernel(A)
    rho, theta = 0.7, 0.35
    coarse = ker_integral_bounds_probe(spec, 1 - rho, theta + rho, 0.0, 1.0, n=400)
    fine = ker_integral_bounds_probe(spec, 1 - rho, theta + rho, 0.0, 1.0, n=800)
    assert np.isfinite(fine) and abs(fine / coarse - 1) < 1e-2


@pytest.mark.parametrize("args", [(0.6, 1.0, 0.6, 1.0), (0.0, 0.2, 0.0, 1.0), (0.0, 0.3, 0.0, 0.3), (0.7, 1.0, 0.0, 1.0)])
def test_probe_hypotheses(args):
    with pytest.raises(HypothesisError):
        ker_integral_bounds_probe(power_law_kernel(A), *args)
