"""Finite-type convex domains and their pointwise geometry.

The base object is the superellipse ``(x/a)**omega + (y/b)**omega <= 1`` with
``omega`` an even integer.  A :class:`RotatedDomain` wraps it with an angle
``theta``; every rotated quantity is obtained from the base one through
``R_theta^t`` exactly as composed, so the equivariance identities hold to
rounding.

Vectors ``xi`` may be a single pair or an array of shape ``(..., 2)``; the
scalar-returning operations broadcast over leading axes.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, OutOfRange, PrecisionFailure

# Curvature is reported as exactly 0.0 within this (relative) distance of a flat normal.
FLAT_NORMAL_TIE = 1e-14
# Tolerance of the bisection Gauss inversion used for non-closed-form boundaries.
BISECT_TOL = 1e-12


def _ipow(x: np.ndarray, n: int) -> np.ndarray:
    """``x**n`` for a nonnegative integer ``n`` by repeated squaring (much faster than ``np.power``)."""
    result = np.ones_like(x)
    base = x
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class DomainModel(Protocol):
    """What the rest of the package needs from a base (unrotated) domain.

    A new family only has to supply these; rotation is handled by
    :class:`RotatedDomain`.
    """

    omega: int

    def membership(self, x, y): ...

    def gauss_base(self, u: np.ndarray) -> np.ndarray: ...

    def curvature_base(self, u: np.ndarray) -> np.ndarray: ...

    def polar_boundary(self, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class SuperellipseDomain:
    omega: int
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if int(self.omega) != self.omega or self.omega < 2 or self.omega % 2:
            raise InvalidArgument(f"omega must be an even integer >= 2, got {self.omega!r}")
        if not (self.a > 0 and self.b > 0):
            raise InvalidArgument("semi-axes must be positive")
        object.__setattr__(self, "omega", int(self.omega))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def has_flat_points(self) -> bool:
        return self.omega >= 4

    @property
    def dual_exponent(self) -> float:
        return self.omega / (self.omega - 1.0)

    def membership(self, x, y):
        """``(x/a)^omega + (y/b)^omega``; the closed domain is ``membership <= 1``."""
        w = self.omega
        return (np.asarray(x) / self.a) ** w + (np.asarray(y) / self.b) ** w

    def gauss_base(self, u: np.ndarray) -> np.ndarray:
        """Boundary point with exterior normal ``u`` (any nonzero scale)."""
        u = np.asarray(u, dtype=float)
        w = self.omega
        p = 1.0 / (w - 1.0)
        # flat tie rule: a normal within FLAT_NORMAL_TIE of an axis is that axis
        n = np.hypot(u[..., 0], u[..., 1])
        u = np.where(np.abs(u) <= FLAT_NORMAL_TIE * n[..., None], 0.0, u)
        sa = np.abs(u[..., 0] * self.a)
        sb = np.abs(u[..., 1] * self.b)
        # common scale factors out of the closed form; keeps tiny |u| well conditioned
        m = np.maximum(sa, sb)
        sa, sb = sa / m, sb / m
        denom = (sa ** (w * p) + sb ** (w * p)) ** (1.0 / w)
        x1 = self.a * np.sign(u[..., 0]) * sa ** p / denom
        x2 = self.b * np.sign(u[..., 1]) * sb ** p / denom
        return np.stack([x1, x2], axis=-1)

    def curvature_base(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        x = self.gauss_base(u)
        w = self.omega
        fx = w * x[..., 0] ** (w - 1) / self.a**w
        fy = w * x[..., 1] ** (w - 1) / self.b**w
        fxx = w * (w - 1) * x[..., 0] ** (w - 2) / self.a**w
        fyy = w * (w - 1) * x[..., 1] ** (w - 2) / self.b**w
        kappa = (fxx * fy**2 + fyy * fx**2) / (fx**2 + fy**2) ** 1.5
        if w >= 4:
            n = np.hypot(u[..., 0], u[..., 1])
            flat = (np.abs(u[..., 0]) <= FLAT_NORMAL_TIE * n) | (np.abs(u[..., 1]) <= FLAT_NORMAL_TIE * n)
            kappa = np.where(flat, 0.0, kappa)
        return kappa

    def support_base(self, u: np.ndarray) -> np.ndarray:
        """Closed-form support function: the dual ``omega/(omega-1)`` norm of ``(a u1, b u2)``."""
        u = np.asarray(u, dtype=float)
        q = self.dual_exponent
        sa, sb = np.abs(u[..., 0] * self.a), np.abs(u[..., 1] * self.b)
        m = np.maximum(sa, sb)
        safe = np.where(m > 0, m, 1.0)
        return m * ((sa / safe) ** q + (sb / safe) ** q) ** (1.0 / q)

    def polar_boundary(self, alpha):
        """Boundary ``x(alpha) = r(alpha)(cos alpha, sin alpha)`` and ``dx/dalpha``.

        For even ``omega`` this parametrisation is real-analytic and periodic,
        which is what makes the trapezoid rule spectrally accurate on it.
        """
        alpha = np.asarray(alpha, dtype=float)
        w = self.omega
        c, s = np.cos(alpha), np.sin(alpha)
        ca, sb = c / self.a, s / self.b
        pa, pb = _ipow(ca, w - 1), _ipow(sb, w - 1)
        S = pa * ca + pb * sb
        r = S ** (-1.0 / w)
        dS = w * pa * (-s / self.a) + w * pb * (c / self.b)
        dr = -(1.0 / w) * (r / S) * dS
        x = np.stack([r * c, r * s], axis=-1)
        dx = np.stack([dr * c - r * s, dr * s + r * c], axis=-1)
        return x, dx


def disk(radius: float = 1.0) -> SuperellipseDomain:
    return SuperellipseDomain(2, radius, radius)


@dataclass(frozen=True)
class RotatedDomain:
    base: SuperellipseDomain
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))

    @property
    def omega(self) -> int:
        return self.base.omega

    @functools.cached_property
    def R(self) -> np.ndarray:
        return rotation(self.theta)

    def to_base(self, v) -> np.ndarray:
        """Apply ``R_theta^t`` along the last axis."""
        return np.asarray(v, dtype=float) @ self.R

    def from_base(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.R.T

    def membership(self, x, y):
        c, s = math.cos(self.theta), math.sin(self.theta)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.base.membership(c * x + s * y, -s * x + c * y)

    def polar_boundary(self, alpha):
        x, dx = self.base.polar_boundary(alpha)
        return self.from_base(x), self.from_base(dx)


Domain = Union[SuperellipseDomain, RotatedDomain]


def as_rotated(domain: Domain) -> RotatedDomain:
    if isinstance(domain, RotatedDomain):
        return domain
    if isinstance(domain, SuperellipseDomain):
        return RotatedDomain(domain, 0.0)
    raise InvalidArgument(f"not a domain: {domain!r}")


@dataclass(frozen=True)
class BoundaryPoint:
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: float


@dataclass(frozen=True)
class FlatPoint:
    position: np.ndarray
    normal: np.ndarray
    type: int


class Region(enum.Enum):
    D1 = "D1"
    D2 = "D2"


def _check_vectors(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 2:
        raise InvalidArgument("vectors must have trailing dimension 2")
    if np.any(np.hypot(xi[..., 0], xi[..., 1]) == 0):
        raise InvalidArgument("zero vector has no Gauss point")
    return xi


def _scalar_or_array(v: np.ndarray):
    return float(v) if np.ndim(v) == 0 else v


def gauss_points(domain: Domain, xi) -> np.ndarray:
    """Vectorised ``x^theta(xi)``: boundary positions for an array of normals."""
    d = as_rotated(domain)
    xi = _check_vectors(xi)
    return d.from_base(d.base.gauss_base(d.to_base(xi)))


def gauss_point(domain: Domain, xi) -> BoundaryPoint:
    """Boundary point of ``B_theta`` whose exterior normal is parallel to ``xi``."""
    xi = _check_vectors(xi)
    if xi.shape != (2,):
        raise InvalidArgument("gauss_point takes a single vector; use gauss_points")
    n = xi / np.hypot(*xi)
    return BoundaryPoint(
        position=gauss_points(domain, n),
        normal=n,
        tangent=np.array([-n[1], n[0]]),
        curvature=float(curvature(domain, n)),
    )


def curvature(domain: Domain, xi):
    """Curvature ``K^theta_xi`` of the rotated boundary at the point with normal ``xi``."""
    d = as_rotated(domain)
    xi = _check_vectors(xi)
    return _scalar_or_array(d.base.curvature_base(d.to_base(xi)))


def support(domain: Domain, xi):
    """Support function ``H_theta(xi) = <xi, x^theta(xi)>``."""
    d = as_rotated(domain)
    xi = _check_vectors(xi)
    x = gauss_points(d, xi)
    return _scalar_or_array(np.sum(xi * x, axis=-1))


def support_hessian(domain: Domain, xi, h: float | None = None, k_floor: float = 1e-3) -> np.ndarray:
    """Central-difference Hessian of ``H_theta`` at ``xi``.

    The default step ``1e-4 * max(K, 0.1) * |xi|`` balances truncation against
    the ``K^-3`` growth of third derivatives.  Raises :class:`PrecisionFailure`
    when the curvature is below ``k_floor`` or the step cannot resolve the
    curvature scale.
    """
    xi = _check_vectors(xi)
    if xi.shape != (2,):
        raise InvalidArgument("support_hessian takes a single vector")
    r = float(np.hypot(*xi))
    K = float(curvature(domain, xi))
    if K < k_floor:
        raise PrecisionFailure(f"curvature {K:.3g} below floor {k_floor:.3g}; Hessian blows up at flat normals")
    if h is None:
        h = 1e-4 * max(K, 0.1) * r
    H0 = abs(float(support(domain, xi)))
    scale = 1.0 / (r * K)
    roundoff = 4e-16 * max(H0, 1.0) / h**2
    truncation = (h / r) ** 2 * K**-5 / r
    if roundoff > 1e-3 * scale or truncation > 1e-3 * scale or h > 0.05 * r * K**1.5:
        raise PrecisionFailure(f"step {h:.3g} unsuited to curvature scale {K:.3g}")
    e = np.eye(2) * h
    pts = []
    for i in range(2):
        for j in range(2):
            pts += [xi + e[i] + e[j], xi + e[i] - e[j], xi - e[i] + e[j], xi - e[i] - e[j]]
    vals = np.asarray(support(domain, np.array(pts))).reshape(2, 2, 4)
    hess = (vals[..., 0] - vals[..., 1] - vals[..., 2] + vals[..., 3]) / (4 * h * h)
    return 0.5 * (hess + hess.T)


def flat_points(domain: Domain) -> list[FlatPoint]:
    """Zero-curvature boundary points (the four axis points when ``omega >= 4``)."""
    d = as_rotated(domain)
    base = d.base
    if not base.has_flat_points:
        return []
    normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    positions = normals * np.array([base.a, base.b])
    return [
        FlatPoint(position=d.from_base(p), normal=d.from_base(n), type=base.omega)
        for p, n in zip(positions, normals)
    ]


def delta_xi(domain: Domain, xi):
    """``min(K_xi, K_-xi)``."""
    xi = _check_vectors(xi)
    return _scalar_or_array(np.minimum(curvature(domain, xi), curvature(domain, -xi)))


def in_d2(domain: Domain, k, delta: float) -> np.ndarray:
    """Vectorised membership of lattice vectors in ``D2(delta, theta)``."""
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    return np.asarray(delta_xi(domain, k)) <= delta


def region_classify(domain: Domain, k, delta: float) -> Region:
    k = np.asarray(k)
    if k.shape != (2,):
        raise InvalidArgument("region_classify takes a single lattice vector")
    return Region.D2 if bool(in_d2(domain, k, delta)) else Region.D1


def _normal_angle(d: RotatedDomain, alpha: float) -> float:
    _, dx = d.polar_boundary(alpha)
    return math.atan2(-dx[0], dx[1])


def gauss_point_bisect(domain: Domain, xi, tol: float = BISECT_TOL) -> np.ndarray:
    """Gauss inversion by bisection on the polar angle of the boundary.

    Route for domains without a closed-form inverse.  The exterior normal angle
    is monotone in the polar angle and stays within ``pi/2`` of it, which gives
    the initial bracket.
    """
    d = as_rotated(domain)
    xi = _check_vectors(xi)
    # polar_boundary is parametrised by the base-frame angle
    beta = math.atan2(xi[1], xi[0]) - d.theta

    def g(alpha):
        return math.remainder(_normal_angle(d, alpha) - beta - d.theta, 2 * math.pi)

    lo, hi = beta - math.pi / 2 + 1e-12, beta + math.pi / 2 - 1e-12
    alpha = brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    x, _ = d.polar_boundary(alpha)
    return x


@functools.lru_cache(maxsize=64)
def _phi_max_cached(omega: int, a: float, b: float) -> float:
    # neighbourhood of the flat normal e1: the arc on which K stays below half its maximum
    base = SuperellipseDomain(omega, a, b)
    ang = np.linspace(0, 2 * np.pi, 8192, endpoint=False)
    k = base.curvature_base(np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    half = 0.5 * float(k.max())

    def f(phi):
        return float(base.curvature_base(np.array([math.cos(phi), math.sin(phi)]))) - half

    grid = np.linspace(1e-9, math.pi / 2, 4096)
    vals = np.array([f(p) for p in grid])
    idx = int(np.argmax(vals >= 0))
    if vals[idx] < 0:
        raise PrecisionFailure("curvature never reaches half its maximum near the flat normal")
    return brentq(f, grid[idx - 1], grid[idx], xtol=1e-14)


def phi_max(domain: Domain, flat: FlatPoint) -> float:
    d = as_rotated(domain)
    base = d.base
    # the four flat points of a superellipse are images of e1 under axis swaps,
    # so evaluate the neighbourhood in the matching base orientation
    nb = d.to_base(flat.normal)
    if abs(nb[0]) > abs(nb[1]):
        return _phi_max_cached(base.omega, base.a, base.b)
    return _phi_max_cached(base.omega, base.b, base.a)


def angle_curvature_ratio(domain: Domain, flat: FlatPoint, phi: float) -> float:
    """``angle / K**((w-1)/(w-2))`` at the boundary point whose normal is ``phi`` off the flat normal.

    Bounded above and below near each flat point; ``phi`` must lie in
    ``(0, phi_max)``.
    """
    d = as_rotated(domain)
    if not d.base.has_flat_points:
        raise InvalidArgument("domain has no flat points")
    pm = phi_max(d, flat)
    if not 0 < phi < pm:
        raise OutOfRange(f"phi={phi!r} outside flat-point neighbourhood (0, {pm:.4g})")
    n = np.asarray(flat.normal, dtype=float)
    xi = rotation(phi) @ n
    K = float(curvature(d, xi))
    w = flat.type
    return phi / K ** ((w - 1) / (w - 2))
