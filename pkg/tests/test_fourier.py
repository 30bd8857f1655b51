import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import j1

from latdisc import fourier
from latdisc.counting import area
from latdisc.geometry import RotatedDomain, SuperellipseDomain, disk


def _slab_oracle(w, a, b, s):
    """chi_hat(s e1) of the axis-aligned superellipse as a 1-D cosine integral."""
    f = lambda x: 2 * b * max(0.0, 1 - abs(x / a) ** w) ** (1 / w)  # noqa: E731
    val, _ = quad(f, -a, a, weight="cos", wvar=2 * math.pi * s, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def test_disk_matches_bessel_and_is_rotation_invariant():
    lams = np.array([0.3, 2.7, 55.0, 321.0])
    exact = j1(2 * np.pi * lams) / lams
    got = fourier.ft_numeric_many(disk(), [1.0, 0.0], lams)
    assert np.max(np.abs(got - exact) / np.abs(exact)) < 1e-9
    rot = fourier.ft_numeric(RotatedDomain(disk(), 0.8), [0.6, 0.8], 2.7)
    assert rot == pytest.approx(exact[1], rel=1e-9)


@pytest.mark.parametrize("w,a,b", [(4, 1.0, 1.0), (6, 1.3, 0.7)])
@pytest.mark.parametrize("s", [0.7, 5.3, 20.0])
def test_superellipse_against_slab_integral(w, a, b, s):
    got = fourier.ft_numeric(SuperellipseDomain(w, a, b), [1.0, 0.0], s)
    want = _slab_oracle(w, a, b, s)
    assert abs(got - want) < 1e-8 * max(abs(want), 1e-3)


def test_small_frequency_gives_area():
    d = RotatedDomain(SuperellipseDomain(4, 1.0, 2.0), 0.3)
    assert fourier.ft_numeric(d, [0.6, 0.8], 1e-4).real == pytest.approx(area(d), rel=1e-6)


def test_centrally_symmetric_transform_is_real():
    d = RotatedDomain(SuperellipseDomain(6), 0.9)
    v = fourier.ft_numeric(d, [0.28, 0.96], 37.0)
    assert abs(v.imag) < 1e-10 * max(abs(v), 1e-6)


def test_asymptotic_error_decays_faster_than_main_term():
    d = RotatedDomain(SuperellipseDomain(4), 0.2)
    u = np.array([math.cos(0.9), math.sin(0.9)])
    lams = np.array([100.0, 1000.0])
    err = np.abs(fourier.ft_numeric_many(d, u, lams) - fourier.ft_asymptotic(d, u, lams))
    assert err[1] < err[0] / 100  # error ~ lam^{-5/2}


def test_asymptotic_nan_at_flat_normal():
    d = SuperellipseDomain(4)
    assert np.isnan(fourier.ft_asymptotic_at(d, np.array([[3.0, 0.0]]))).all()


def test_lattice_transform_matches_pointwise():
    d = RotatedDomain(SuperellipseDomain(4, 1.0, 1.2), 0.4)
    t, K = 7.3, 4
    table = fourier.lattice_ft_numeric(d, t, K)
    assert table[K, K] == pytest.approx(area(d))
    for k in [(1, 0), (-2, 3), (4, 4), (0, -1)]:
        want = fourier.ft_numeric(d, np.array(k, float), t)
        assert abs(table[k[0] + K, k[1] + K] - want) < 1e-10


def test_calibrated_budget_covers_reference_grid():
    d = SuperellipseDomain(6)
    cal = fourier.calibrate(d, xi_angles=fourier.default_xi_angles(d, n=6), lambdas=fourier.log_grid(50, 200, 10))
    assert cal.c_fit == pytest.approx(2 * cal.raw_max)
    ev = fourier.fourier_eval(d, [math.cos(cal.xi_angles[0]), math.sin(cal.xi_angles[0])], 100.0, cal)
    assert ev.within_budget


def test_log_grid_nested():
    small, big = fourier.log_grid(1, 100, 10), fourier.log_grid(1, 1000, 10)
    assert np.allclose(big[: small.size], small)


def test_profile_csv_roundtrip():
    rows = fourier.profile_rows(SuperellipseDomain(4), 0.7, [50.0, 60.0])
    text = fourier.profile_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(fourier.PROFILE_CSV_FIELDS)
    assert len(lines) == 3
