"""Fourier transform of the indicator of a rotated domain.

Convention: ``chi_hat(zeta) = int_B exp(-2 pi i <x, zeta>) dx``.

The numeric route integrates ``n_l exp(-2 pi i lam <x, xi>)`` around the
boundary and divides by ``-2 pi i lam xi_l``.  The boundary is parametrised by
the polar angle, which is real-analytic and periodic for even ``omega``, so
the trapezoid rule converges spectrally.  With ``x(alpha)`` traversed
counterclockwise, ``n_1 ds = x_2'(alpha) d alpha`` and
``n_2 ds = -x_1'(alpha) d alpha``.

The asymptotic route is the two-point stationary-phase leading term built
from the curvature and support function at ``+-xi``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import finufft
import numpy as np

from .counting import area
from .errors import InvalidArgument, PrecisionFailure
from .geometry import Domain, as_rotated, curvature, delta_xi, flat_points, rotation, support

NODES_PER_PERIOD = 20
FT_RTOL = 1e-10
MAX_NODES = 2**27
# below this many (nodes x frequencies) the sums are formed directly
_DIRECT_LIMIT = 2**23
NUFFT_EPS = 1e-13
PROFILE_PER_DECADE = 40
# the lattice transform shares one node set across all frequencies; the
# periodic analytic integrand needs far fewer than 20 nodes per period
LATTICE_NODES_PER_PERIOD = 6
# e^{3 pi i / 4}
_E3 = complex(math.cos(3 * math.pi / 4), math.sin(3 * math.pi / 4))


def _unit(xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,):
        raise InvalidArgument("xi must be a single 2-vector")
    r = float(np.hypot(*xi))
    if r == 0:
        raise InvalidArgument("xi must be nonzero")
    return xi / r, r


def _speed_bound(d, xi) -> float:
    alpha = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
    _, dx = d.polar_boundary(alpha)
    return float(np.max(np.abs(dx @ xi))) * 1.05 + 1e-3


def _start_nodes(d, xi, lam_max: float) -> int:
    need = NODES_PER_PERIOD * 2 * math.pi * lam_max * _speed_bound(d, xi)
    return 1 << max(7, math.ceil(math.log2(max(need, 1.0))))


def _weights(d, xi, n: int, l: int):
    alpha = 2 * math.pi * np.arange(n) / n
    x, dx = d.polar_boundary(alpha)
    m = dx[:, 1] if l == 0 else -dx[:, 0]
    return x @ xi, m * (2 * math.pi / n)


def _exp_sums(s, c, lams):
    """``sum_j c_j exp(-2 pi i lam s_j)`` for each ``lam``."""
    lams = np.asarray(lams, dtype=float)
    if s.size * lams.size <= _DIRECT_LIMIT:
        return np.exp(-2j * math.pi * np.outer(lams, s)) @ c
    return finufft.nufft1d3(s, c.astype(complex), 2 * math.pi * lams, eps=NUFFT_EPS, isign=-1)


def nlds_numeric(domain: Domain, xi, lams, l: int | None = None, rtol: float = FT_RTOL, atol: float = 0.0):
    """``int_{dB} n_l exp(-2 pi i lam <x, xi>) ds`` for each ``lam`` (``l`` is 0-based).

    The node count starts at 20 per period of the fastest oscillation, rounded
    to a power of two, and doubles until the rule on ``n`` and on its
    ``n/2`` sub-grid agree.
    """
    d = as_rotated(domain)
    u, _ = _unit(xi)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if l is None:
        l = int(np.argmax(np.abs(u)))
    n = _start_nodes(d, u, float(np.max(lams)))
    while n <= MAX_NODES:
        s, c = _weights(d, u, n, l)
        full = _exp_sums(s, c, lams)
        half = _exp_sums(np.ascontiguousarray(s[::2]), 2 * c[::2], lams)
        floor = 64 * NUFFT_EPS * float(np.sum(np.abs(c))) if s.size * lams.size > _DIRECT_LIMIT else 0.0
        tol = np.maximum(rtol * np.abs(full), max(atol, floor))
        if np.all(np.abs(full - half) <= tol):
            return full
        n *= 2
    raise PrecisionFailure("boundary quadrature did not settle")


def ft_numeric_many(domain: Domain, xi, lams, l: int | None = None, rtol: float = FT_RTOL, atol: float = 0.0):
    """``chi_hat(lam * xi)`` for an array of ``lam`` along one direction (``xi`` any nonzero vector)."""
    u, r = _unit(xi)
    lams = np.atleast_1d(np.asarray(lams, dtype=float)) * r
    if np.any(lams < 0):
        raise InvalidArgument("lambda must be nonnegative")
    if l is None:
        l = int(np.argmax(np.abs(u)))
    if abs(u[l]) == 0:
        raise InvalidArgument("chosen component of xi vanishes")
    out = np.empty(lams.shape, dtype=complex)
    zero = lams == 0
    out[zero] = area(domain)
    if np.any(~zero):
        nl = nlds_numeric(domain, u, lams[~zero], l, rtol=rtol, atol=atol)
        out[~zero] = -nl / (2j * math.pi * lams[~zero] * u[l])
    return out


def ft_numeric(domain: Domain, xi, lam: float, l: int | None = None) -> complex:
    """``chi_hat_{B_theta}(lam * xi)`` through the boundary integral."""
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    return complex(ft_numeric_many(domain, xi, [lam], l)[0])


def _antipodal(domain, u):
    d = as_rotated(domain)
    k_plus = float(curvature(d, u))
    k_minus = float(curvature(d, -u))
    if k_plus <= 0 or k_minus <= 0:
        raise InvalidArgument("flat normal: the asymptotic term is undefined, use ft_numeric")
    return k_plus, k_minus, float(support(d, u)), float(support(d, -u))


def ft_asymptotic(domain: Domain, xi, lam):
    """Leading two-point term of ``chi_hat(lam * xi)``; ``lam`` may be an array."""
    u, r = _unit(xi)
    lam = np.asarray(lam, dtype=float) * r
    kp, km, hp, hm = _antipodal(domain, u)
    term = (
        _E3 * kp**-0.5 * np.exp(-2j * math.pi * lam * hp)
        + _E3.conjugate() * km**-0.5 * np.exp(2j * math.pi * lam * hm)
    )
    out = term * lam**-1.5 / (2 * math.pi)
    return complex(out) if out.ndim == 0 else out


def ft_asymptotic_at(domain: Domain, zeta) -> np.ndarray:
    """Leading term at an array of frequency vectors ``zeta`` (shape ``(..., 2)``).

    Entries at flat normals come back as NaN.
    """
    d = as_rotated(domain)
    zeta = np.asarray(zeta, dtype=float)
    lam = np.hypot(zeta[..., 0], zeta[..., 1])
    u = zeta / lam[..., None]
    kp = np.asarray(curvature(d, u), dtype=float)
    km = np.asarray(curvature(d, -u), dtype=float)
    hp = np.asarray(support(d, u), dtype=float)
    hm = np.asarray(support(d, -u), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = (
            _E3 * kp**-0.5 * np.exp(-2j * math.pi * lam * hp)
            + _E3.conjugate() * km**-0.5 * np.exp(2j * math.pi * lam * hm)
        )
        out = term * lam**-1.5 / (2 * math.pi)
    return np.where((kp > 0) & (km > 0), out, complex("nan"))


def perimeter(domain: Domain, n: int = 4096) -> float:
    """Boundary length by the (spectrally accurate) trapezoid rule in the polar angle."""
    _, dx = as_rotated(domain).polar_boundary(2 * math.pi * np.arange(n) / n)
    return float(np.sum(np.hypot(dx[:, 0], dx[:, 1])) * 2 * math.pi / n)


def lattice_ft_numeric(domain: Domain, t: float, K: int, nodes: int | None = None,
                       nodes_per_period: float = LATTICE_NODES_PER_PERIOD) -> np.ndarray:
    """``chi_hat(t k)`` for every ``k`` with ``|k_1|, |k_2| <= K``; array indexed ``[k1 + K, k2 + K]``.

    One two-dimensional type-1 NUFFT per weight ``n_1 ds`` and ``n_2 ds``;
    each ``k`` then uses the weight of its larger component.  The centre
    entry is the area.
    """
    d = as_rotated(domain)
    if nodes is None:
        alpha = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
        _, dx = d.polar_boundary(alpha)
        vmax = float(np.max(np.hypot(dx[:, 0], dx[:, 1]))) * 1.05
        need = nodes_per_period * 2 * math.pi * t * K * math.sqrt(2) * vmax
        nodes = max(256, 2 * math.ceil(need / 2))
    alpha = 2 * math.pi * np.arange(nodes) / nodes
    x, dx = d.polar_boundary(alpha)
    X = np.mod(2 * math.pi * t * x[:, 0] + math.pi, 2 * math.pi) - math.pi
    Y = np.mod(2 * math.pi * t * x[:, 1] + math.pi, 2 * math.pi) - math.pi
    w = 2 * math.pi / nodes
    c = np.stack([dx[:, 1] * w, -dx[:, 0] * w]).astype(complex)
    f = finufft.nufft2d1(X, Y, c, n_modes=(2 * K + 1, 2 * K + 1), eps=1e-12, isign=-1)
    k = np.arange(-K, K + 1, dtype=float)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    use_first = np.abs(K1) >= np.abs(K2)
    comp = np.where(use_first, K1, K2)
    nl = np.where(use_first, f[0], f[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -nl / (2j * math.pi * t * comp)
    out[K, K] = area(d)
    return out


def nlds_asymptotic(domain: Domain, xi, lam, l: int):
    """Leading term of the boundary integral with weight ``n_l`` (``l`` 0-based)."""
    u, r = _unit(xi)
    lam = np.asarray(lam, dtype=float) * r
    kp, km, hp, hm = _antipodal(domain, u)
    e1 = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    out = u[l] * lam**-0.5 * (
        e1 * kp**-0.5 * np.exp(-2j * math.pi * lam * hp)
        + _E3 * km**-0.5 * np.exp(2j * math.pi * lam * hm)
    )
    return complex(out) if out.ndim == 0 else out


def budget_shape(lam, delta):
    """``lam^-5/2 delta^-7/2 + lam^-2 delta^-4`` (multiplied by a fitted constant)."""
    lam = np.asarray(lam, dtype=float)
    return lam**-2.5 * delta**-3.5 + lam**-2.0 * delta**-4.0


@dataclass(frozen=True)
class Calibration:
    """Fitted constant for the asymptotic error budget, with the grid it came from."""

    c_fit: float
    raw_max: float
    safety: float
    xi_angles: tuple
    lambdas: tuple = field(repr=False)


def default_xi_angles(domain: Domain, n: int = 24, min_delta: float = 0.5) -> np.ndarray:
    ang = np.pi * (np.arange(n) + 0.5) / n
    keep = [a for a in ang if delta_xi(domain, np.array([math.cos(a), math.sin(a)])) >= min_delta]
    return np.array(keep)


def log_grid(lo: float, hi: float, per_decade: int = PROFILE_PER_DECADE) -> np.ndarray:
    """Points ``10^(i/per_decade)`` in ``[lo, hi]``; anchored, so grids nest as ``hi`` grows."""
    i0 = math.ceil(per_decade * math.log10(lo) - 1e-9)
    i1 = math.floor(per_decade * math.log10(hi) + 1e-9)
    return 10.0 ** (np.arange(i0, i1 + 1) / per_decade)


def calibrate(domain: Domain, xi_angles=None, lambdas=None, safety: float = 2.0) -> Calibration:
    """Smallest constant making the budget dominate on the reference grid, times ``safety``."""
    if xi_angles is None:
        xi_angles = default_xi_angles(domain)
    if lambdas is None:
        lambdas = log_grid(50, 1000)
    lambdas = np.asarray(lambdas, dtype=float)
    worst = 0.0
    for a in xi_angles:
        u = np.array([math.cos(a), math.sin(a)])
        delta = float(delta_xi(domain, u))
        err = np.abs(ft_numeric_many(domain, u, lambdas) - ft_asymptotic(domain, u, lambdas))
        worst = max(worst, float(np.max(err / budget_shape(lambdas, delta))))
    return Calibration(worst * safety, worst, safety, tuple(float(a) for a in xi_angles), tuple(lambdas))


@dataclass(frozen=True)
class FourierEval:
    xi: np.ndarray
    lam: float
    numeric: complex
    asymptotic: complex
    error_budget: float
    delta_xi: float

    @property
    def within_budget(self) -> bool:
        return abs(self.numeric - self.asymptotic) <= self.error_budget


def fourier_eval(domain: Domain, xi, lam: float, calibration: Calibration | None = None) -> FourierEval:
    """Numeric value, asymptotic term and budget at one point.

    At a flat normal the asymptotic and budget are NaN.
    """
    u, _ = _unit(xi)
    delta = float(delta_xi(domain, u))
    num = ft_numeric(domain, xi, lam)
    if delta > 0:
        asym = ft_asymptotic(domain, xi, lam)
        c = calibration.c_fit if calibration is not None else float("nan")
        budget = float(c * budget_shape(lam, delta))
    else:
        asym, budget = complex("nan"), float("nan")
    return FourierEval(u, float(lam), num, asym, budget, delta)


# ---------------------------------------------------------------- Randol profile


def profile_grid(r_max: float, n_grid: int = 201, per_decade: int | None = None) -> np.ndarray:
    """Log grid on ``[1, r_max]`` with at least ``n_grid`` points.

    The default density is the larger of 40 per decade and whatever
    ``n_grid`` demands.  Fix ``per_decade`` to get grids that nest as
    ``r_max`` grows.
    """
    if n_grid < 200:
        raise InvalidArgument("profile needs at least 200 grid points")
    if not r_max > 1:
        raise InvalidArgument("r_max must exceed 1")
    if per_decade is None:
        per_decade = max(PROFILE_PER_DECADE, math.ceil((n_grid - 1) / math.log10(r_max)))
    grid = log_grid(1.0, r_max, per_decade)
    if grid.size < n_grid:
        raise InvalidArgument(f"{per_decade} points per decade give only {grid.size} < {n_grid} points")
    return grid


def phi_profile(domain: Domain, xi, r_max: float = 1e5, n_grid: int = 201, per_decade: int | None = None,
                return_argmax: bool = False):
    """``max_r r^{3/2} |chi_hat(r xi)|`` over a log grid in ``[1, r_max]``."""
    u, _ = _unit(xi)
    r = profile_grid(r_max, n_grid, per_decade)
    vals = r**1.5 * np.abs(ft_numeric_many(domain, u, r, rtol=1e-9, atol=1e-12))
    i = int(np.argmax(vals))
    if return_argmax:
        return float(vals[i]), float(r[i])
    return float(vals[i])


@dataclass(frozen=True)
class RandolFit:
    slope: float
    stderr: float
    angles: np.ndarray
    profiles: np.ndarray
    r_max: float


def randol_slope(domain: Domain, angles=None, r_max: float = 1e4, max_r_max: float = 1e6) -> RandolFit:
    """Log-log slope of the profile against the angle off a flat normal.

    If any sup sits at the top of the radial grid the range is widened tenfold
    and the fit repeated.
    """
    from scipy.stats import linregress

    d = as_rotated(domain)
    flats = flat_points(d)
    if not flats:
        raise InvalidArgument("domain has no flat normal")
    n0 = np.asarray(flats[0].normal, dtype=float)
    if angles is None:
        angles = np.logspace(-3, -1, 9)
    angles = np.asarray(angles, dtype=float)
    while True:
        prof, tops = [], []
        grid_top = profile_grid(r_max)[-1]
        for phi in angles:
            v, rr = phi_profile(d, rotation(phi) @ n0, r_max, return_argmax=True)
            prof.append(v)
            tops.append(rr >= grid_top)
        if not any(tops):
            break
        if r_max * 10 > max_r_max:
            raise PrecisionFailure("profile maximum still at the edge of the radial range")
        r_max *= 10
    prof = np.array(prof)
    fit = linregress(np.log(angles), np.log(prof))
    return RandolFit(float(fit.slope), float(fit.stderr), angles, prof, r_max)


# ---------------------------------------------------------------- CSV

PROFILE_CSV_FIELDS = ("omega", "theta", "xi_angle", "lambda", "re_num", "im_num", "re_asym", "im_asym", "delta_xi")


def profile_rows(domain: Domain, xi_angle: float, lambdas):
    """Rows for one direction; asymptotic columns are NaN at a flat normal."""
    d = as_rotated(domain)
    u = np.array([math.cos(xi_angle), math.sin(xi_angle)])
    lambdas = np.asarray(lambdas, dtype=float)
    num = ft_numeric_many(d, u, lambdas)
    delta = float(delta_xi(d, u))
    asym = ft_asymptotic(d, u, lambdas) if delta > 0 else np.full(lambdas.shape, complex("nan"))
    return [(d.omega, d.theta, xi_angle, lam, n.real, n.imag, a.real, a.imag, delta)
            for lam, n, a in zip(lambdas, num, asym)]


def profile_csv(rows, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_CSV_FIELDS)
    for row in rows:
        w.writerow([row[0]] + [format(float(v), ".17g") for v in row[1:]])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
