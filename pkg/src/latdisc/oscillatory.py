"""One-dimensional oscillatory integrals and the explicit bounds around them.

Convention here is ``exp(+i lambda f)`` for a real phase ``f``; the quadratic
stationary-phase expansion uses the phase ``-x^2/2``.

Amplitudes are :class:`SmoothFunction1D` objects carrying analytic
derivatives. Two families are provided: Gaussian packets (closed-form
derivatives through a polynomial recurrence) and compactly supported
polynomial-times-bump functions (derivatives from sympy).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from .errors import InvalidArgument, PrecisionFailure

OSC_RTOL = 1e-10
NODES_PER_PERIOD = 20
MAX_DOUBLINGS = 24
NORM_RTOL = 1e-8


@dataclass(frozen=True)
class SmoothFunction1D:
    """``derivative(x, j)`` returns ``u^(j)(x)`` for ``0 <= j <= order``.

    ``support`` is a finite interval outside which ``u`` and its declared
    derivatives vanish (or are negligible below double precision).
    """

    derivative: Callable[[np.ndarray, int], np.ndarray]
    order: int
    support: tuple[float, float]
    label: str = field(default="", compare=False)

    def __call__(self, x):
        return self.derivative(np.asarray(x, dtype=float), 0)

    def deriv(self, x, j: int):
        if not 0 <= j <= self.order:
            raise InvalidArgument(f"derivative order {j} exceeds declared order {self.order}")
        return self.derivative(np.asarray(x, dtype=float), j)


@dataclass(frozen=True)
class PhaseReport:
    integral_value: complex
    approximation: complex
    certified_bound: float
    observed_error: float

    @property
    def holds(self) -> bool:
        return self.observed_error <= self.certified_bound


# ---------------------------------------------------------------- amplitudes


def gaussian_packet(c: complex = 1.0, alpha: complex = 1.0, beta: complex = 0.0, order: int = 9) -> SmoothFunction1D:
    """``Re(c * exp(-alpha x^2 + beta x))`` with ``Re(alpha) > 0``.

    Derivatives are ``Re(c p_n(x) exp(...))`` where ``p_0 = 1`` and
    ``p_{n+1} = p_n' + (-2 alpha x + beta) p_n``.
    """
    alpha, beta, c = complex(alpha), complex(beta), complex(c)
    if alpha.real <= 0:
        raise InvalidArgument("packet needs Re(alpha) > 0")
    polys = [Polynomial([1.0 + 0j])]
    dP = Polynomial([beta, -2 * alpha])
    for _ in range(order):
        p = polys[-1]
        polys.append(p.deriv() + dP * p)

    # truncate where |exp| < e^-90, which also swamps the polynomial growth
    ar, br = alpha.real, abs(beta.real)
    level = 90.0 + max(0.0, math.log(abs(c) + 1e-300))
    L = (br + math.sqrt(br * br + 4 * ar * level)) / (2 * ar)

    def derivative(x, j):
        return np.real(c * polys[j](x) * np.exp(-alpha * x * x + beta * x))

    return SmoothFunction1D(derivative, order, (-L, L), label=f"packet(c={c},alpha={alpha},beta={beta})")


_X = sp.Symbol("x", real=True)


def from_sympy(expr, support: tuple[float, float], order: int, inner_margin: float = 0.0, label: str = "") -> SmoothFunction1D:
    """Wrap a sympy expression in ``x``; derivatives are differentiated symbolically.

    Values are forced to zero outside ``support`` shrunk by ``inner_margin``
    (used for bumps whose derivative formulas overflow at the support edge).
    """
    x = _X
    funcs = []
    e = sp.sympify(expr)
    free = e.free_symbols
    if len(free) > 1:
        raise InvalidArgument("expression must depend on a single variable")
    if free:
        e = e.subs(free.pop(), x)
    for _ in range(order + 1):
        funcs.append(sp.lambdify(x, e, "numpy", cse=True))
        e = sp.diff(e, x)
    lo, hi = support

    def derivative(xv, j):
        xv = np.asarray(xv, dtype=float)
        inside = (xv > lo + inner_margin) & (xv < hi - inner_margin)
        safe = np.where(inside, xv, 0.5 * (lo + hi))
        with np.errstate(all="ignore"):
            val = np.broadcast_to(funcs[j](safe), safe.shape).astype(float)
        return np.where(inside, val, 0.0)

    return SmoothFunction1D(derivative, order, (float(lo), float(hi)), label=label or str(expr))


def _bump_numerators(order: int) -> list[Polynomial]:
    """``N_n`` with ``d^n/dy^n exp(-1/(1-y^2)) = N_n(y) (1-y^2)^(-2n) exp(-1/(1-y^2))``."""
    one_m = Polynomial([1.0, 0.0, -1.0])
    y = Polynomial([0.0, 1.0])
    nums = [Polynomial([1.0])]
    for n in range(order):
        N = nums[-1]
        nums.append(N.deriv() * one_m**2 + 4 * n * y * N * one_m - 2 * y * N)
    return nums


def bump_amplitude(center: float = 0.0, width: float = 1.0, coeffs=(1.0,), order: int = 9) -> SmoothFunction1D:
    """``poly(x) * exp(-1 / (1 - ((x - center)/width)^2))`` on ``|x - center| < width``.

    Derivatives combine the exact rational recurrence for the bump with
    Leibniz' rule for the polynomial factor.
    """
    if not width > 0:
        raise InvalidArgument("width must be positive")
    nums = _bump_numerators(order)
    P = Polynomial(np.asarray(coeffs, dtype=float))
    Pd = [P.deriv(m) if m else P for m in range(order + 1)]
    lo, hi = center - width, center + width

    def derivative(x, j):
        x = np.asarray(x, dtype=float)
        y = (x - center) / width
        inside = np.abs(y) < 1.0 - 1e-3
        ys = np.where(inside, y, 0.0)
        s = 1.0 - ys * ys
        b = np.exp(-1.0 / s)
        total = np.zeros_like(ys)
        for i in range(j + 1):
            bi = nums[i](ys) * s ** (-2 * i) * b / width**i
            total = total + math.comb(j, i) * Pd[j - i](x) * bi
        return np.where(inside, total, 0.0)

    return SmoothFunction1D(derivative, order, (lo, hi),
                            label=f"bump(center={center},width={width},coeffs={tuple(float(c) for c in coeffs)})")


def random_amplitude(rng: np.random.Generator, order: int = 9) -> SmoothFunction1D:
    """Either a Gaussian packet or a polynomial bump with random parameters."""
    if rng.random() < 0.5:
        alpha = complex(rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
        beta = complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
        c = complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5))
        return gaussian_packet(c, alpha, beta, order)
    width = rng.uniform(0.7, 2.0)
    center = rng.uniform(-0.4, 0.4) * width
    coeffs = rng.uniform(-1.0, 1.0, size=3)
    coeffs[0] = 1.0 + abs(coeffs[0])
    return bump_amplitude(center, width, coeffs, order)


def derivative_consistency(u: SmoothFunction1D, n_points: int = 25, tol: float = 1e-6) -> float:
    """Largest mismatch between ``u^(j+1)`` and a central difference of ``u^(j)``.

    Relative to the sup of ``|u^(j+1)|`` on the sample; raises if above ``tol``.
    """
    lo, hi = u.support
    xs = np.linspace(lo, hi, n_points + 2)[1:-1]
    worst = 0.0
    for j in range(u.order):
        h = 1e-4 * (hi - lo)
        fd = (-u.deriv(xs + 2 * h, j) + 8 * u.deriv(xs + h, j) - 8 * u.deriv(xs - h, j) + u.deriv(xs - 2 * h, j)) / (12 * h)
        exact = u.deriv(xs, j + 1)
        scale = max(float(np.max(np.abs(exact))), 1e-300)
        worst = max(worst, float(np.max(np.abs(fd - exact))) / scale)
    if worst > tol:
        raise PrecisionFailure(f"supplied derivatives disagree with finite differences ({worst:.2e})")
    return worst


# ---------------------------------------------------------------- quadrature


def osc_quad(u, phase: Callable, lam: float, phase_slope_max: float | None = None,
             rtol: float = OSC_RTOL, atol: float = 0.0, interval: tuple[float, float] | None = None) -> complex:
    """``int u(x) exp(i lam phase(x)) dx`` by the trapezoid rule with doubling.

    ``u`` is a :class:`SmoothFunction1D` (or a callable together with
    ``interval``).  The amplitude vanishes smoothly at the ends, so the rule is
    spectrally accurate and no extrapolation is needed.  The starting grid has
    at least 20 nodes per period of ``lam * phase``; doubling stops when two
    successive values agree to ``max(rtol |I|, atol)``.
    """
    if not lam >= 0:
        raise InvalidArgument("lambda must be nonnegative")
    if isinstance(u, SmoothFunction1D):
        lo, hi = interval or u.support
        ufun = u
    else:
        if interval is None:
            raise InvalidArgument("a plain callable needs an interval")
        lo, hi = interval
        ufun = u
    length = hi - lo
    if phase_slope_max is None:
        xs = np.linspace(lo, hi, 4097)
        phase_slope_max = float(np.max(np.abs(np.gradient(phase(xs), xs))))
    periods = lam * phase_slope_max * length / (2 * math.pi)
    n = max(64, int(math.ceil(NODES_PER_PERIOD * periods)))

    def trap(n):
        xs = np.linspace(lo, hi, n + 1)
        vals = ufun(xs) * np.exp(1j * lam * phase(xs))
        return (length / n) * (np.sum(vals) - 0.5 * (vals[0] + vals[-1]))

    prev = trap(n)
    for _ in range(MAX_DOUBLINGS):
        n *= 2
        cur = trap(n)
        if abs(cur - prev) <= max(rtol * abs(cur), atol):
            return complex(cur)
        prev = cur
    raise PrecisionFailure(f"trapezoid rule did not settle after {MAX_DOUBLINGS} doublings")


def l2_norm(u: SmoothFunction1D, j: int) -> float:
    """``||u^(j)||_{L^2}`` by adaptive quadrature (relative tolerance 1e-8)."""
    lo, hi = u.support
    # split at a few interior points so quad sees the bulk of the mass
    pts = np.linspace(lo, hi, 17)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = quad(lambda s: float(u.deriv(np.array(s), j)) ** 2, a, b, epsrel=NORM_RTOL, epsabs=0.0, limit=400)
        total += val
    return math.sqrt(total)


# ---------------------------------------------------------------- stationary phase

_SP_PREFACTOR = math.sqrt(2 * math.pi) * complex(math.cos(-math.pi / 4), math.sin(-math.pi / 4))


def stationary_approximation(u: SmoothFunction1D, lam: float, k: int) -> complex:
    """``sqrt(2 pi) e^{-i pi/4} lam^{-1/2} sum_{j<k} (2 i lam)^{-j} u^(2j)(0) / j!``."""
    total = 0j
    for j in range(k):
        total += (2j * lam) ** (-j) * float(u.deriv(np.array(0.0), 2 * j)) / math.factorial(j)
    return _SP_PREFACTOR * lam**-0.5 * total


def stationary_bound(u: SmoothFunction1D, lam: float, k: int) -> float:
    """``(2^{1-k} sqrt(pi) / k!) lam^{-k-1/2} (||u^(2k)|| + ||u^(2k+1)||)``."""
    const = 2.0 ** (1 - k) * math.sqrt(math.pi) / math.factorial(k)
    return const * lam ** (-k - 0.5) * (l2_norm(u, 2 * k) + l2_norm(u, 2 * k + 1))


def stationary_phase_1d(u: SmoothFunction1D, lam: float, k: int) -> PhaseReport:
    """Compare ``int u(x) e^{-i lam x^2/2} dx`` with its ``k``-term expansion."""
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    if k < 1:
        raise InvalidArgument("expansion order k must be >= 1")
    if u.order < 2 * k + 1:
        raise InvalidArgument(f"need {2 * k + 1} derivatives of u, only {u.order} declared")
    lo, hi = u.support
    integral = osc_quad(u, lambda x: -0.5 * x * x, lam, phase_slope_max=max(abs(lo), abs(hi)))
    approx = stationary_approximation(u, lam, k)
    return PhaseReport(
        integral_value=integral,
        approximation=approx,
        certified_bound=stationary_bound(u, lam, k),
        observed_error=abs(integral - approx),
    )


# ---------------------------------------------------------------- nonstationary phase


@dataclass(frozen=True)
class NonstationaryFit:
    constant: float
    decay_slope: float
    lambdas: np.ndarray
    magnitudes: np.ndarray
    rhs_shape: np.ndarray


def nonstationary_bound_check(u: SmoothFunction1D, f: Callable, df: Callable, lambda_grid, k: int,
                              n_sup: int = 8193) -> NonstationaryFit:
    """Smallest constant making ``C |supp u| lam^-k sum_{nu<=k} sup |u^(nu)| |f'|^(nu-2k)`` dominate.

    Returns the fitted constant (a measured value, not a claimed one) and the
    log-log slope of ``|int u e^{i lam f}|`` against ``lam``.
    """
    if k < 1 or k > u.order:
        raise InvalidArgument("k must be between 1 and the declared derivative order")
    lo, hi = u.support
    xs = np.linspace(lo, hi, n_sup)
    slope = np.abs(df(xs))
    live = np.zeros_like(xs, dtype=bool)
    for nu in range(k + 1):
        live |= u.deriv(xs, nu) != 0
    if np.any(live) and float(np.min(slope[live])) <= 0:
        raise InvalidArgument("phase gradient vanishes on the support of u")
    lams = np.asarray(lambda_grid, dtype=float)
    shape_const = 0.0
    for nu in range(k + 1):
        with np.errstate(divide="ignore"):
            term = np.where(live, np.abs(u.deriv(xs, nu)) * slope ** (nu - 2 * k), 0.0)
        shape_const += float(np.max(term))
    rhs = (hi - lo) * lams ** (-k) * shape_const
    smax = float(np.max(slope)) if slope.size else 0.0
    mags = np.array([abs(osc_quad(u, f, lam, phase_slope_max=smax, atol=1e-300)) for lam in lams])
    if shape_const == 0.0:
        return NonstationaryFit(0.0, float("nan"), lams, mags, rhs)
    C = float(np.max(mags / rhs))
    pos = mags > 0
    slope_fit = float(np.polyfit(np.log(lams[pos]), np.log(mags[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return NonstationaryFit(C, slope_fit, lams, mags, rhs)


# ---------------------------------------------------------------- inverse function radii


def ift_radii(c: float, C: float, d: int, r0: float) -> tuple[float, float]:
    """Radii ``(r1, r2)`` of the quantitative inverse function theorem.

    ``r1 = min(c / (2 d^{7/2} (d-1)! C^d), r0)`` and
    ``r2 = c r1 / (4 d^{3/2} (d-1)! C^{d-1})``.
    """
    if not (c > 0 and C > 0 and r0 > 0) or d < 1:
        raise InvalidArgument("c, C, r0 must be positive and d >= 1")
    fac = math.factorial(d - 1)
    r1 = min(c / (2 * d**3.5 * fac * C**d), r0)
    r2 = c * r1 / (4 * d**1.5 * fac * C ** (d - 1))
    return r1, r2


# ---------------------------------------------------------------- nondegenerate 2-D phase


@dataclass(frozen=True)
class NondegenerateFit:
    constant: float
    lambdas: np.ndarray
    magnitudes: np.ndarray


def _bump2(r2):
    out = np.zeros_like(r2)
    m = r2 < 1
    out[m] = np.exp(-1.0 / (1.0 - r2[m]))
    return out


def nondegenerate_phase_check(phase: Callable, delta: float, lambda_grid, c1: float = 0.5,
                              rtol: float = 1e-8) -> NondegenerateFit:
    """Fit ``C`` in ``|int psi e^{i lam phi}| <= C lam^-1 delta^-1/2`` on a grid of ``lam``.

    ``psi`` is the radial bump supported in ``B(0, c1 delta)``; ``phase`` maps
    ``(x1, x2)`` arrays to values and should satisfy ``|det D^2 phase(0)| >= delta``.
    ``c1`` is the tunable support radius factor.
    """
    if not delta > 0 or not c1 > 0:
        raise InvalidArgument("delta and c1 must be positive")
    rad = c1 * delta
    lams = np.asarray(lambda_grid, dtype=float)
    mags = []
    for lam in lams:
        # a tensor trapezoid is spectrally accurate for the compactly supported bump
        n = 64
        prev = None
        for _ in range(12):
            s = np.linspace(-rad, rad, n + 1)
            X, Y = np.meshgrid(s, s, indexing="ij")
            w = _bump2((X * X + Y * Y) / rad**2)
            val = np.sum(w * np.exp(1j * lam * phase(X, Y))) * (2 * rad / n) ** 2
            if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
                break
            prev = val
            n *= 2
        else:
            raise PrecisionFailure("2-D trapezoid did not settle")
        mags.append(abs(val))
    mags = np.array(mags)
    C = float(np.max(mags * lams * math.sqrt(delta)))
    return NondegenerateFit(C, lams, mags)
