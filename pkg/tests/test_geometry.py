import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latdisc.errors import InvalidArgument, OutOfRange, PrecisionFailure
from latdisc.geometry import (
    Region, RotatedDomain, SuperellipseDomain, angle_curvature_ratio, curvature, delta_xi, disk, flat_points,
    gauss_point, gauss_point_bisect, gauss_points, phi_max, region_classify, support, support_hessian,
)

omegas = st.sampled_from([2, 4, 6, 8])
axes = st.floats(0.5, 2.0)
angles = st.floats(0.0, 2 * math.pi)


def _dom(w, a, b, th):
    return RotatedDomain(SuperellipseDomain(w, a, b), th)


def _unit(a):
    return np.array([math.cos(a), math.sin(a)])


def test_bad_parameters():
    with pytest.raises(InvalidArgument):
        SuperellipseDomain(3)
    with pytest.raises(InvalidArgument):
        SuperellipseDomain(4, -1.0)
    with pytest.raises(InvalidArgument):
        gauss_point(disk(), [0.0, 0.0])


def test_disk_closed_forms():
    p = gauss_point(disk(2.0), [3.0, 4.0])
    assert np.allclose(p.position, [1.2, 1.6])
    assert p.curvature == pytest.approx(0.5)
    assert support(disk(2.0), [3.0, 4.0]) == pytest.approx(10.0)


def test_flat_normal_has_zero_curvature():
    d = _dom(4, 1.0, 1.5, 0.3)
    for f in flat_points(d):
        assert curvature(d, f.normal) == 0.0
        assert np.allclose(gauss_points(d, f.normal), f.position)
    assert flat_points(disk()) == []


@settings(max_examples=60, deadline=None)
@given(omegas, axes, axes, angles, angles)
def test_gauss_point_on_boundary_with_matching_normal(w, a, b, th, phi):
    d = _dom(w, a, b, th)
    x = gauss_points(d, _unit(phi))
    assert d.membership(x[0], x[1]) == pytest.approx(1.0, rel=1e-10)
    # support equals max of <xi, x> over a dense boundary sample
    al = np.linspace(0, 2 * math.pi, 20001)
    pts, _ = d.polar_boundary(al)
    assert support(d, _unit(phi)) == pytest.approx(np.max(pts @ _unit(phi)), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(omegas, axes, axes, angles, angles)
def test_bisection_agrees_with_closed_form(w, a, b, th, phi):
    d = _dom(w, a, b, th)
    xi = _unit(phi)
    if w > 2 and delta_xi(d, xi) < 1e-3:
        return
    assert np.allclose(gauss_point_bisect(d, xi), gauss_points(d, xi), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(omegas, axes, axes, angles, angles, st.floats(0.1, 10.0))
def test_support_homogeneous_and_rotation_covariant(w, a, b, th, phi, s):
    d = _dom(w, a, b, th)
    xi = _unit(phi)
    assert support(d, s * xi) == pytest.approx(s * support(d, xi), rel=1e-12)
    base = RotatedDomain(d.base, 0.0)
    assert support(d, xi) == pytest.approx(support(base, d.to_base(xi)), rel=1e-12)


def test_hessian_spectrum_and_floor():
    d = _dom(4, 1.0, 1.3, 0.2)
    xi = 2.0 * _unit(0.9)
    ev = np.sort(np.linalg.eigvalsh(support_hessian(d, xi)))
    assert ev[1] == pytest.approx(1 / (2.0 * curvature(d, xi)), rel=1e-5)
    assert abs(ev[0]) < 1e-5 * ev[1]
    with pytest.raises(PrecisionFailure):
        support_hessian(d, flat_points(d)[0].normal)


def test_region_classify():
    d = SuperellipseDomain(4)
    assert region_classify(d, [1, 0], 0.5) is Region.D2
    assert region_classify(d, [1, 1], 0.5) is Region.D1
    with pytest.raises(InvalidArgument):
        region_classify(d, [1, 0], 0.0)


def test_angle_curvature_ratio_bounded_near_flat_point():
    d = _dom(6, 1.0, 1.0, 0.4)
    f = flat_points(d)[0]
    pm = phi_max(d, f)
    r = [angle_curvature_ratio(d, f, p) for p in np.geomspace(1e-4, 0.9 * pm, 30)]
    assert max(r) / min(r) < 10
    with pytest.raises(OutOfRange):
        angle_curvature_ratio(d, f, 2 * pm)
