"""Mollified lattice counts by truncated Poisson summation.

``N_eps(t) = sum_k (chi_{tB} * rho_eps)(k) = t^2 sum_k chi_hat(t k) rho_hat(eps k)``.

The sum is truncated at ``|k| <= k_max`` where a rigorous upper bound on the
discarded terms falls below ``1e-6 t^{1/2}``.  The bound uses

* ``|chi_hat(zeta)| <= sqrt(2) perimeter / (2 pi |zeta|)``, from the
  boundary-integral formula with the larger frequency component;
* a nonincreasing envelope of ``|rho_hat|``;
* comparison of the lattice sum with an integral over shifted unit squares.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0

from . import counting
from .errors import CostGuardExceeded, InvalidArgument
from .geometry import Domain, as_rotated, delta_xi, in_d2
from .fourier import ft_asymptotic_at, lattice_ft_numeric, perimeter

TAIL_REL = 1e-6
K_MAX_CAP = 2000
SOURCE_DELTA = 0.5
SOURCE_LAMBDA = 50.0
ZETA = 1.0 / 3831
LOG_EXPONENT_B = 1.1
ENV_FLOOR = 1e-15


# ---------------------------------------------------------------- schedule


def alpha_exponent(omega: int) -> float:
    return (426 * omega - 832) / (1277 * omega - 2496)


def beta_exponent(omega: int) -> float:
    return (omega - 2) / (1277 * omega - 2496)


def sigma(omega: int) -> float:
    return 832 / (1277 * (1277 * omega - 2496))


def schedule(j: int, omega: int) -> tuple[float, float]:
    """``(eps, delta) = (2^{-j alpha(omega)}, 2^{-j beta(omega)})``; ``delta = 0`` for the round case."""
    if j < 1:
        raise InvalidArgument("j must be >= 1")
    if omega < 2 or omega % 2:
        raise InvalidArgument("omega must be even and >= 2")
    eps = 2.0 ** (-j * alpha_exponent(omega))
    delta = 0.0 if omega == 2 else 2.0 ** (-j * beta_exponent(omega))
    return eps, delta


# ---------------------------------------------------------------- mollifier


@dataclass(frozen=True)
class Mollifier:
    """Normalised bump ``c exp(-1/(1-|y|^2))`` on the unit disk, with a radial table of its transform."""

    s: np.ndarray
    values: np.ndarray
    envelope: np.ndarray
    spline: CubicSpline
    norm_const: float
    mass: float
    # cumulative upper sums  int_s^inf env  and  int_s^inf env / s
    tail_env: np.ndarray
    tail_env_over_s: np.ndarray

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def rho(self, y):
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        out = np.zeros_like(r2)
        m = r2 < 1
        out[m] = self.norm_const * np.exp(-1.0 / (1.0 - r2[m]))
        return out

    def hat(self, s):
        """``rho_hat`` at radius ``s``; exactly zero past the table (where it is below 1e-16)."""
        s = np.abs(np.asarray(s, dtype=float))
        out = np.where(s <= self.s_max, self.spline(np.minimum(s, self.s_max)), 0.0)
        return out

    def env(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 1)
        return np.where(s <= self.s_max, self.envelope[idx], 0.0)

    def tail_integral(self, s_lo: float, c_eps: float) -> float:
        """Upper bound on ``int_{s_lo}^inf (1 + c_eps / s) env(s) ds``."""
        if s_lo <= 0:
            return math.inf
        i = int(np.searchsorted(self.s, s_lo, side="right") - 1)
        if i >= self.s.size - 1:
            return 0.0
        # piece [s_lo, s[i+1]] with the envelope value at s[i] (nonincreasing)
        head = (self.s[i + 1] - s_lo) * self.envelope[i] * (1 + c_eps / s_lo)
        return float(head + self.tail_env[i + 1] + c_eps * self.tail_env_over_s[i + 1])


@functools.lru_cache(maxsize=4)
def mollifier(s_max: float = 150.0, ds: float = 0.005, n_gl: int = 3000) -> Mollifier:
    """Build the radial transform table by Gauss-Legendre quadrature in ``r``."""
    x, w = np.polynomial.legendre.leggauss(n_gl)
    r, w = 0.5 * (x + 1), 0.5 * w
    bump = np.exp(-1.0 / (1.0 - r * r))
    mass_raw = 2 * math.pi * float(np.sum(w * bump * r))
    c = 1.0 / mass_raw
    weights = 2 * math.pi * c * w * bump * r
    s = np.arange(0.0, s_max + ds / 2, ds)
    vals = np.empty_like(s)
    for i in range(0, s.size, 2000):
        blk = s[i:i + 2000]
        vals[i:i + 2000] = j0(2 * math.pi * np.outer(blk, r)) @ weights
    spline = CubicSpline(s, vals)
    # running max from the right, padded by 1% to cover the spline between nodes,
    # plus an absolute floor for the rounding noise of the table itself
    env = 1.01 * np.maximum.accumulate(np.abs(vals)[::-1])[::-1] + ENV_FLOOR
    # upper Riemann sums from the right (left-endpoint values of a nonincreasing envelope)
    seg = env[:-1] * np.diff(s)
    seg_s = np.where(s[:-1] > 0, env[:-1] / np.where(s[:-1] > 0, s[:-1], 1.0), np.inf) * np.diff(s)
    tail_env = np.append(np.cumsum(seg[::-1])[::-1], 0.0)
    tail_env_s = np.append(np.cumsum(seg_s[::-1])[::-1], 0.0)
    return Mollifier(s, vals, env, spline, c, float(np.sum(weights)), tail_env, tail_env_s)


# ---------------------------------------------------------------- truncation


def tail_bound(domain: Domain, t: float, eps: float, K: float, moll: Mollifier | None = None) -> float:
    """Upper bound on ``t^2 sum_{|k| > K} |chi_hat(t k)| |rho_hat(eps k)|``."""
    moll = moll or mollifier()
    c = math.sqrt(2) / 2
    if K <= 2 * c:
        return math.inf
    pref = t * math.sqrt(2) * perimeter(domain) / (2 * math.pi)
    # sum_{|k|>K} f(|k|) <= int_{|x| > K - c} f(|x| - c) dx with f(r) = env(eps r)/r;
    # substituting s = eps (r - c) gives (2 pi / eps) int (1 + c eps / s) env(s) ds
    return pref * (2 * math.pi / eps) * moll.tail_integral(eps * (K - 2 * c), c * eps)


def choose_k_max(domain: Domain, t: float, eps: float, moll: Mollifier | None = None,
                 cap: int = K_MAX_CAP) -> tuple[int, float]:
    """Smallest integer radius whose tail bound is at most ``1e-6 t^{1/2}``."""
    moll = moll or mollifier()
    target = TAIL_REL * math.sqrt(t)
    lo, hi = 2, 4
    while tail_bound(domain, t, eps, hi, moll) > target:
        lo, hi = hi, hi * 2
        if lo > cap:
            raise CostGuardExceeded(f"truncation radius exceeds {cap}: eps={eps} too small for t={t}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_bound(domain, t, eps, mid, moll) > target:
            lo = mid
        else:
            hi = mid
    if hi > cap:
        raise CostGuardExceeded(f"truncation radius {hi} exceeds {cap}: eps={eps} too small for t={t}")
    return hi, tail_bound(domain, t, eps, hi, moll)


# ---------------------------------------------------------------- the sum


@dataclass(frozen=True)
class PoissonCount:
    t: float
    theta: float
    epsilon: float
    value: float
    k_max: int
    tail_bound: float
    sum_D1: complex
    sum_D2: complex
    delta: float
    imag_residue: float
    n_asymptotic: int
    n_numeric: int

    @property
    def split(self):
        return self.sum_D1, self.sum_D2, self.delta


@dataclass(frozen=True)
class _Terms:
    k: np.ndarray  # (n, 2) nonzero lattice vectors with |k| <= K
    terms: np.ndarray  # t^2 chi_hat(t k) rho_hat(eps k)
    asym: np.ndarray  # which source was used


def _terms(domain: Domain, t: float, eps: float, K: int, moll: Mollifier) -> _Terms:
    d = as_rotated(domain)
    grid = lattice_ft_numeric(d, t, K)
    r = np.arange(-K, K + 1)
    K1, K2 = np.meshgrid(r, r, indexing="ij")
    keep = (K1**2 + K2**2 <= K * K) & ~((K1 == 0) & (K2 == 0))
    k = np.stack([K1[keep], K2[keep]], axis=-1).astype(float)
    chi = grid[keep]
    kn = np.hypot(k[:, 0], k[:, 1])
    use_asym = (np.asarray(delta_xi(d, k)) >= SOURCE_DELTA) & (t * kn >= SOURCE_LAMBDA)
    if np.any(use_asym):
        chi = chi.copy()
        chi[use_asym] = ft_asymptotic_at(d, t * k[use_asym])
    terms = t * t * chi * moll.hat(eps * kn)
    return _Terms(k, terms, use_asym)


def _pairwise_sum(x: np.ndarray) -> complex:
    # numpy's add.reduce is pairwise over contiguous data, hence order-deterministic
    return complex(np.add.reduce(np.ascontiguousarray(x)))


def mollified_count(domain: Domain, t: float, epsilon: float, delta: float = SOURCE_DELTA,
                    k_max: int | None = None, moll: Mollifier | None = None) -> PoissonCount:
    """``N_eps(t)`` with its truncation bound and the ``D1``/``D2`` split at ``delta``."""
    if not t >= 2:
        raise InvalidArgument("t must be >= 2")
    if not 0 < epsilon < 1:
        raise InvalidArgument("epsilon must lie in (0, 1)")
    d = as_rotated(domain)
    moll = moll or mollifier()
    if k_max is None:
        k_max, tb = choose_k_max(d, t, epsilon, moll)
    else:
        tb = tail_bound(d, t, epsilon, k_max, moll)
    T = _terms(d, t, epsilon, k_max, moll)
    a = counting.area(d) * t * t
    if delta > 0:
        d2 = in_d2(d, T.k, delta)
    else:
        d2 = np.zeros(T.k.shape[0], dtype=bool)
    s1 = _pairwise_sum(T.terms[~d2])
    s2 = _pairwise_sum(T.terms[d2])
    total = s1 + s2
    value = a + total.real
    return PoissonCount(
        t=float(t), theta=d.theta, epsilon=float(epsilon), value=float(value), k_max=int(k_max),
        tail_bound=float(tb), sum_D1=s1, sum_D2=s2, delta=float(delta),
        imag_residue=abs(total.imag) / max(abs(value), 1e-300),
        n_asymptotic=int(T.asym.sum()), n_numeric=int((~T.asym).sum()),
    )


def split_sums(domain: Domain, t: float, epsilon: float, delta: float) -> tuple[complex, complex]:
    """``(sum over D1, sum over D2)`` of the truncated Poisson sum (area term excluded)."""
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    pc = mollified_count(domain, t, epsilon, delta)
    return pc.sum_D1, pc.sum_D2


# ---------------------------------------------------------------- sandwich


def inradius_constant(domain: Domain) -> float:
    """``C1 = 1.01 / inradius``; the superellipse inradius is ``min(a, b)``."""
    base = as_rotated(domain).base
    return 1.01 / min(base.a, base.b)


@dataclass(frozen=True)
class SandwichResult:
    t: float
    theta: float
    epsilon: float
    count: int
    lower: float
    upper: float
    value: float
    tail_lower: float
    tail_upper: float
    sum_D1_abs: float
    sum_D2_abs: float
    delta: float
    retries: int

    @property
    def holds(self) -> bool:
        return self.lower - self.tail_lower <= self.count <= self.upper + self.tail_upper


def sandwich(domain: Domain, t: float, epsilon: float, delta: float = SOURCE_DELTA) -> SandwichResult:
    """Evaluate both sides of ``N_eps(t - C1 eps) <= #(tB cap Z^2) <= N_eps(t + C1 eps)``.

    An ambiguous exact count moves ``t`` by the counting module's retry
    policy; the mollified sides are then taken at the moved ``t``.
    """
    d = as_rotated(domain)
    res, retries = counting.certified_count(d, t)
    t_used = res.t
    c1 = inradius_constant(d)
    lo = mollified_count(d, t_used - c1 * epsilon, epsilon, delta)
    hi = mollified_count(d, t_used + c1 * epsilon, epsilon, delta)
    mid = mollified_count(d, t_used, epsilon, delta)
    return SandwichResult(
        t=t_used, theta=d.theta, epsilon=float(epsilon), count=res.count,
        lower=lo.value, upper=hi.value, value=mid.value,
        tail_lower=lo.tail_bound, tail_upper=hi.tail_bound,
        sum_D1_abs=abs(mid.sum_D1), sum_D2_abs=abs(mid.sum_D2), delta=float(delta), retries=retries,
    )


def sandwich_check(domain: Domain, t: float, epsilon: float) -> bool:
    return sandwich(domain, t, epsilon).holds


SANDWICH_CSV_FIELDS = ("t", "theta", "epsilon", "value", "count_exact", "lower", "upper", "sum_D1_abs", "sum_D2_abs", "delta")


def sandwich_csv(results, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SANDWICH_CSV_FIELDS)
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    for r in results:
        w.writerow([g(r.t), g(r.theta), g(r.epsilon), g(r.value), r.count, g(r.lower), g(r.upper),
                    g(r.sum_D1_abs), g(r.sum_D2_abs), g(r.delta)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def d2_diagnostic(base, t: float, epsilon: float, delta: float, thetas) -> float:
    """Mean of ``|sum over D2|`` across rotations (reported, never asserted)."""
    from .geometry import RotatedDomain

    vals = [abs(mollified_count(RotatedDomain(base, th), t, epsilon, delta).sum_D2) for th in thetas]
    return float(np.mean(vals))


# ---------------------------------------------------------------- real-space oracle


def mollified_count_direct(domain: Domain, t: float, epsilon: float, n_r: int = 64, n_phi: int = 2048,
                           moll: Mollifier | None = None) -> float:
    """``sum_k (chi_{tB} * rho_eps)(k)`` evaluated in real space.

    Lattice points of ``(t - C eps) B`` contribute 1 and points outside
    ``(t + C eps) B`` contribute 0 (``C`` the reciprocal inradius).  Points in
    between get the convolution integral by a polar product rule over the
    support of ``rho_eps``.  No Fourier machinery is involved.
    """
    d = as_rotated(domain)
    moll = moll or mollifier()
    w = d.omega
    c = 1.0 / min(d.base.a, d.base.b)
    pad = 1 + 1e-9
    t_in, t_out = t - c * epsilon * pad, t + c * epsilon * pad
    R = math.ceil(t_out * math.hypot(d.base.a, d.base.b)) + 1
    rng = np.arange(-R, R + 1, dtype=float)
    K1, K2 = np.meshgrid(rng, rng, indexing="ij")
    g = d.membership(K1, K2)
    inner = int(np.sum(g <= t_in**w)) if t_in > 0 else 0
    shell = (g <= t_out**w) & ((g > t_in**w) if t_in > 0 else True)
    pts = np.stack([K1[shell], K2[shell]], axis=-1)
    x, wx = np.polynomial.legendre.leggauss(n_r)
    rr, wr = 0.5 * (x + 1), 0.5 * wx
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    Y = rr[:, None, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)[None, :, :]
    wts = (wr * rr)[:, None] * (2 * math.pi / n_phi) * moll.rho(Y)
    tw = float(t) ** w
    total = 0.0
    for p in pts:
        q = p - epsilon * Y
        total += float(np.sum(wts * (d.membership(q[..., 0], q[..., 1]) <= tw)))
    return inner + total
