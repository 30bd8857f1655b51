import cmath
import math

import numpy as np
import pytest
import sympy as sp

from latdisc import oscillatory as osc
from latdisc.errors import InvalidArgument


def _gauss_closed_form(c, a, b, lam):
    # int c exp(-a x^2 + b x) exp(-i lam x^2 / 2) dx
    A = a + 0.5j * lam
    return c * cmath.sqrt(math.pi / A) * cmath.exp(b * b / (4 * A))


@pytest.mark.parametrize("lam", [1.0, 10.0, 100.0, 1000.0])
def test_quadrature_against_gaussian_closed_form(lam):
    c, a, b = 1 + 0.2j, 0.8 + 0.3j, 0.4 - 0.2j
    u = osc.gaussian_packet(c, a, b)
    got = osc.osc_quad(u, lambda x: -0.5 * x * x, lam)
    # the packet is the real part, i.e. the mean of the term and its conjugate
    want = 0.5 * (_gauss_closed_form(c, a, b, lam) + _gauss_closed_form(c.conjugate(), a.conjugate(), b.conjugate(), lam))
    assert abs(got - want) <= 1e-10 * abs(want)


def test_amplitude_derivatives_consistent():
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert osc.derivative_consistency(osc.random_amplitude(rng)) < 1e-6
    x = sp.Symbol("x")
    u = osc.from_sympy(sp.exp(-x**2) * sp.cos(x), (-9.0, 9.0), order=5)
    assert osc.derivative_consistency(u) < 1e-6


def test_bump_vanishes_outside_support():
    u = osc.bump_amplitude(0.5, 2.0, (1.0, 0.3))
    assert np.all(u.deriv(np.array([-1.6, -1.5, 2.5, 3.0]), 4) == 0)
    with pytest.raises(InvalidArgument):
        u.deriv(0.0, u.order + 1)


def test_stationary_phase_bound_and_convergence():
    u = osc.gaussian_packet(1.0, 0.5, 0.1)
    errs = []
    for lam in (10.0, 100.0, 1000.0):
        r = osc.stationary_phase_1d(u, lam, 2)
        assert r.holds
        errs.append(r.observed_error)
    # k = 2 leaves an O(lam^{-5/2}) error
    assert errs[2] < errs[0] * 1e-3


def test_l2_norm_of_gaussian():
    u = osc.gaussian_packet(1.0, 1.0, 0.0)
    assert osc.l2_norm(u, 0) == pytest.approx((math.pi / 2) ** 0.25, rel=1e-8)


def test_nonstationary_decay():
    u = osc.bump_amplitude(0.0, 1.0)
    fit = osc.nonstationary_bound_check(u, lambda x: x + 0.1 * x**2, lambda x: 1 + 0.2 * x, [10, 20, 40, 80], k=2)
    assert np.isfinite(fit.constant)
    assert fit.decay_slope < -2
    with pytest.raises(InvalidArgument):
        osc.nonstationary_bound_check(u, lambda x: x * x, lambda x: 2 * x, [10.0], k=1)


def test_ift_radii():
    r1, r2 = osc.ift_radii(1.0, 2.0, 2, 10.0)
    assert r1 == pytest.approx(1 / (2 * 2**3.5 * 4))
    assert r2 == pytest.approx(r1 / (4 * 2**1.5 * 2))
    assert osc.ift_radii(1.0, 1e-9, 1, 0.25)[0] == 0.25
    with pytest.raises(InvalidArgument):
        osc.ift_radii(0.0, 1.0, 2, 1.0)


def test_nondegenerate_constant_stable():
    fit = osc.nondegenerate_phase_check(lambda x, y: x * x - y * y + 0.1 * x**3, 1.0, [50, 100, 200, 400])
    scaled = fit.magnitudes * fit.lambdas
    assert scaled.max() / scaled.min() < 3
