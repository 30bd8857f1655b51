"""Two-dimensional exponential sums, Weyl-van der Corput differencing, and the
integral-vector / determinant construction for the support function.

Convention: ``e(x) = exp(-2 pi i x)``.

``S(T, M; G, F) = sum_m G(m/M) e(T F(m/M))``.

Phases are sympy expressions in ``x1, x2`` so that directional derivatives of
any order are exact; amplitudes are plain vectorised callables.
"""
from __future__ import annotations

import csv
import functools
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
import sympy as sp

from .errors import CostGuardExceeded, InvalidArgument, PrecisionFailure
from .geometry import Domain, as_rotated, curvature

M_STAR_MAX = 10_000
X1, X2 = sp.symbols("x1 x2", real=True)
GL_NODES = 10


# ---------------------------------------------------------------- phases and amplitudes


@dataclass(frozen=True)
class Phase:
    """A smooth real phase given symbolically in ``x1, x2``."""

    expr: sp.Expr

    @functools.cached_property
    def _np(self):
        return sp.lambdify((X1, X2), self.expr, "numpy")

    @functools.cached_property
    def _mp(self):
        return sp.lambdify((X1, X2), self.expr, "mpmath")

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        return np.broadcast_to(self._np(x1, np.asarray(x2, dtype=float)), x1.shape).astype(float)

    def mp_eval(self, x1, x2):
        return self._mp(x1, x2)

    def directional(self, shifts: Sequence[Sequence[int]]) -> Callable:
        """Numpy callable for ``<r_1, grad> ... <r_q, grad> F``."""
        return _directional(self.expr, tuple(tuple(int(c) for c in r) for r in shifts))


@functools.lru_cache(maxsize=256)
def _directional(expr, shifts):
    e = expr
    for r1, r2 in shifts:
        e = r1 * sp.diff(e, X1) + r2 * sp.diff(e, X2)
    e = sp.expand(e) if e.is_polynomial(X1, X2) else e
    f = sp.lambdify((X1, X2), e, "numpy")

    def call(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        return np.broadcast_to(f(x1, np.asarray(x2, dtype=float)), x1.shape).astype(float)

    return call


def radial_bump(radius: float, height: float = 1.0) -> Callable:
    """``height * exp(-1/(1 - |x|^2/radius^2))`` inside the disk, 0 outside."""

    def G(x1, x2):
        r2 = (np.asarray(x1, dtype=float) ** 2 + np.asarray(x2, dtype=float) ** 2) / radius**2
        out = np.zeros(np.broadcast(r2).shape)
        m = r2 < 1
        out[m] = height * np.exp(-1.0 / (1.0 - r2[m]))
        return out

    G.support_radius = radius  # type: ignore[attr-defined]
    return G


# ---------------------------------------------------------------- the sum


@dataclass(frozen=True)
class ExpSumInstance:
    """``(T, M*, G, F)`` with ``supp G`` inside the open disk ``Omega = B(0, c0)``."""

    T: float
    M_star: float
    G: Callable
    F: Phase
    c0: float = 1.0

    def __post_init__(self):
        if not self.T > 0 or not self.M_star > 1 or not self.c0 > 0:
            raise InvalidArgument("need T > 0, M* > 1 and c0 > 0")

    def in_omega(self, x1, x2):
        return np.asarray(x1) ** 2 + np.asarray(x2) ** 2 < self.c0**2

    def check_support(self, n: int = 201) -> bool:
        s = np.linspace(-1.5 * self.c0, 1.5 * self.c0, n)
        X, Y = np.meshgrid(s, s, indexing="ij")
        return bool(np.all(self.G(X, Y)[~self.in_omega(X, Y)] == 0))


def _lattice_rows(M: float, c0: float):
    R = int(math.ceil(c0 * M))
    return np.arange(-R, R + 1, dtype=float)


def _sum(T: float, M: float, c0: float, amp: Callable, phase: Callable) -> tuple[complex, float]:
    """Return ``(S, sum |amp|)`` over the box covering ``B(0, c0)``, row block by row block."""
    if M > M_STAR_MAX:
        raise CostGuardExceeded(f"M* = {M} exceeds {M_STAR_MAX}")
    ms = _lattice_rows(M, c0)
    total, mass = 0j, 0.0
    block = max(1, 2_000_000 // ms.size)
    for i in range(0, ms.size, block):
        X, Y = np.meshgrid(ms[i:i + block] / M, ms / M, indexing="ij")
        g = amp(X, Y)
        live = g != 0
        if not np.any(live):
            continue
        x, y, g = X[live], Y[live], g[live]
        total += complex(np.sum(g * np.exp(-2j * math.pi * T * phase(x, y))))
        mass += float(np.sum(np.abs(g)))
    return total, mass


def eval_sum(inst: ExpSumInstance) -> complex:
    """``sum_m G(m/M*) e(T F(m/M*))``; the triangle inequality is checked on every call."""
    S, mass = _sum(inst.T, inst.M_star, inst.c0, inst.G, inst.F)
    if abs(S) > mass * (1 + 1e-12) + 1e-300:
        raise PrecisionFailure("|S| exceeds sum |G|")
    return S


# ---------------------------------------------------------------- differencing


def _check_shifts(shifts, q):
    shifts = [tuple(int(c) for c in r) for r in shifts]
    if len(shifts) != q:
        raise InvalidArgument(f"need {q} shift vectors")
    if any(r == (0, 0) for r in shifts):
        raise InvalidArgument("shift vectors must be nonzero")
    return shifts


@dataclass(frozen=True)
class DifferencedInstance:
    base: ExpSumInstance
    q: int
    shifts: tuple
    h: tuple
    nodes: int = GL_NODES
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # corner offsets sum_l (h_l / M*) u_l r_l for u in {0,1}^q
        M = self.base.M_star
        offs = []
        for u in itertools.product((0, 1), repeat=self.q):
            offs.append(sum(np.array(r, dtype=float) * (hl / M) * ul for r, hl, ul in zip(self.shifts, self.h, u)))
        object.__setattr__(self, "_offsets", np.array(offs).reshape(-1, 2))

    @property
    def Q(self) -> int:
        return 2**self.q

    @property
    def scale(self) -> float:
        """``prod_l h_l / M*``: the factor linking ``F_q`` to the forward difference."""
        return math.prod(hl / self.base.M_star for hl in self.h)

    def G_q(self, x1, x2):
        x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
        out = np.ones(np.broadcast(x1, x2).shape)
        for o in self._offsets:
            out = out * self.base.G(x1 + o[0], x2 + o[1])
        return out

    def in_omega_q(self, x1, x2):
        x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
        ok = np.ones(np.broadcast(x1, x2).shape, dtype=bool)
        for o in self._offsets:
            ok &= self.base.in_omega(x1 + o[0], x2 + o[1])
        return ok

    def F_q(self, x1, x2):
        """Integral representation by a tensor Gauss-Legendre rule on ``(0,1)^q``."""
        x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
        deriv = self.base.F.directional(self.shifts)
        gx, gw = np.polynomial.legendre.leggauss(self.nodes)
        gx, gw = 0.5 * (gx + 1), 0.5 * gw
        M = self.base.M_star
        steps = [np.array(r, dtype=float) * hl / M for r, hl in zip(self.shifts, self.h)]
        total = np.zeros(np.broadcast(x1, x2).shape)
        for idx in itertools.product(range(self.nodes), repeat=self.q):
            w = math.prod(gw[i] for i in idx)
            off = sum(steps[l] * gx[i] for l, i in enumerate(idx))
            total += w * deriv(x1 + off[0], x2 + off[1])
        return total


def difference_transform(inst: ExpSumInstance, q: int, shifts, h, nodes: int = GL_NODES) -> DifferencedInstance:
    if q < 1:
        raise InvalidArgument("q must be >= 1")
    shifts = _check_shifts(shifts, q)
    h = tuple(int(v) for v in h)
    if len(h) != q or any(v < 1 for v in h):
        raise InvalidArgument("need q positive integer steps h_l")
    return DifferencedInstance(inst, q, tuple(shifts), h, nodes)


def forward_difference_quotient(phase: Phase, x, shifts, h, M_star: float, dps: int = 40):
    """``(Delta_{h_q r_q / M} ... Delta_{h_1 r_1 / M} F)(x) / prod(h_l / M)`` in ``dps``-digit arithmetic."""
    shifts = [tuple(int(c) for c in r) for r in shifts]
    h = [int(v) for v in h]
    with mp.workdps(dps):
        M = mp.mpf(M_star)
        x1, x2 = mp.mpf(x[0]), mp.mpf(x[1])
        total = mp.mpf(0)
        q = len(shifts)
        for u in itertools.product((0, 1), repeat=q):
            p1, p2 = x1, x2
            for (r1, r2), hl, ul in zip(shifts, h, u):
                if ul:
                    p1 += r1 * mp.mpf(hl) / M
                    p2 += r2 * mp.mpf(hl) / M
            sign = -1 if (q - sum(u)) % 2 else 1
            total += sign * phase.mp_eval(p1, p2)
        denom = mp.mpf(1)
        for hl in h:
            denom *= mp.mpf(hl) / M
        return float(total / denom)


# ---------------------------------------------------------------- differencing inequality


@dataclass(frozen=True)
class VdcReport:
    q: int
    T: float
    M_star: float
    H: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def vdc_inequality_report(inst: ExpSumInstance, q: int, shifts, H: float) -> VdcReport:
    """Both sides of the ``q``-fold differencing inequality, inner sums evaluated directly.

    ``H_l = H^(2^(l-q))`` and the inner sum runs over ``1 <= h_l < H_l``.
    """
    shifts = _check_shifts(shifts, q)
    if not 1 < H <= inst.M_star:
        raise InvalidArgument("need 1 < H <= M*")
    Q = 2**q
    M = inst.M_star
    Hl = [H ** (2.0 ** (l - q)) for l in range(1, q + 1)]
    S = eval_sum(inst)
    lhs = abs(S) ** Q
    ranges = [range(1, math.ceil(hl)) for hl in Hl]
    inner = 0.0
    for h in itertools.product(*ranges):
        dq = difference_transform(inst, q, shifts, h)
        calH = math.prod(h)
        Sq, _ = _sum(calH * inst.T * M ** (-q), M, inst.c0, dq.G_q, dq.F_q)
        inner += abs(Sq)
    rhs = M ** (2 * Q) / H + M ** (2 * (Q - 1)) / math.prod(Hl) * inner
    return VdcReport(q, float(inst.T), float(M), float(H), float(lhs), float(rhs))


VDC_CSV_FIELDS = ("q", "T", "Mstar", "H", "lhs", "rhs", "ratio")


def vdc_csv(reports, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VDC_CSV_FIELDS)
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    for r in reports:
        w.writerow([r.q, g(r.T), g(r.M_star), g(r.H), g(r.lhs), g(r.rhs), g(r.ratio)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def exponent_pair_bound(K: float, T: float, M_star: float, q: int, C: float = 1.0, R: float = 0.0) -> float:
    """``C (K^{-12q-1} T M*^{6Q-q-6})^{1/(3Q-2)} + R`` (a calculator; never checked against sums)."""
    Q = 2**q
    return C * (K ** (-12 * q - 1) * T * M_star ** (6 * Q - q - 6)) ** (1.0 / (3 * Q - 2)) + R


# ---------------------------------------------------------------- integral vectors


@dataclass(frozen=True)
class VStar:
    v1: tuple
    v2: tuple
    L: int
    N: int
    N_defaulted: bool


def construct_vstar(xi, q: int, K: float, N_override: int | None = None) -> VStar:
    """Orthogonal integral vectors ``v1* = (-N2, N1)``, ``v2* = (N1, N2)`` with ``N_l = round(N xi_l)``.

    The default ``N = ceil(K^{-4q})`` stands in for an unspecified constant
    and is flagged by ``N_defaulted``.
    """
    xi = np.asarray(xi, dtype=float)
    n = float(np.hypot(*xi))
    if n == 0:
        raise InvalidArgument("xi must be nonzero")
    xi = xi / n
    if not K > 0:
        raise InvalidArgument("K must be positive")
    if N_override is not None:
        if N_override < 2 * math.sqrt(2):
            raise InvalidArgument("N must be at least 2 sqrt(2)")
        N = int(N_override)
    else:
        N = max(3, math.ceil(K ** (-4 * q)))
    N1, N2 = int(round(N * xi[0])), int(round(N * xi[1]))
    return VStar((-N2, N1), (N1, N2), N1 * N1 + N2 * N2, N, N_override is None)


# ---------------------------------------------------------------- determinant


def _support_mp(d, y1, y2):
    base = d.base
    c, s = mp.cos(d.theta), mp.sin(d.theta)
    u1, u2 = c * y1 + s * y2, -s * y1 + c * y2
    p = mp.mpf(base.omega) / (base.omega - 1)
    return (abs(base.a * u1) ** p + abs(base.b * u2) ** p) ** (1 / p)


def _central_weights(n: int):
    # n-th central difference: sum_k (-1)^k C(n,k) f(x + (n/2 - k) h) / h^n
    return [((-1) ** k * math.comb(n, k), n / 2 - k) for k in range(n + 1)]


def mixed_partial_mp(f: Callable, n1: int, n2: int, h, levels: int = 5):
    """``d^{n1+n2} f / du1^{n1} du2^{n2}`` at 0 by product central differences plus Richardson.

    ``f`` takes two mpmath numbers; ``h`` is the base step.  Steps halve per
    level and the ``h^2, h^4, ...`` error terms are eliminated.
    """
    w1, w2 = _central_weights(n1), _central_weights(n2)
    table = []
    for lev in range(levels):
        hh = mp.mpf(h) / 2**lev
        acc = mp.mpf(0)
        for c1, o1 in w1:
            for c2, o2 in w2:
                acc += c1 * c2 * f(o1 * hh, o2 * hh)
        row = [acc / hh ** (n1 + n2)]
        for j in range(1, lev + 1):
            fac = mp.mpf(4) ** j
            row.append((fac * row[j - 1] - table[lev - 1][j - 1]) / (fac - 1))
        table.append(row)
    return table[-1][-1], abs(table[-1][-1] - table[-2][-2]) if levels > 1 else mp.inf


def hq_determinant(domain: Domain, y, v1, v2, q: int, k_floor: float = 1e-3, dps: int | None = None,
                   levels: int = 5, return_entries: bool = False):
    """``det(g_ij)`` with ``g_ij = d^{q+2} F / du1 du_i du_j du2^{q-1}`` at 0, ``F(u) = H_theta(y + u1 v1 + u2 v2)``.

    Derivatives use high-precision central differences with step
    ``1e-2 K^2 |y| / max(|v1|, |v2|)`` and Richardson extrapolation.
    """
    d = as_rotated(domain)
    if not 1 <= q <= 3:
        raise InvalidArgument("q must be 1, 2 or 3")
    y = np.asarray(y, dtype=float)
    if float(np.hypot(*y)) == 0:
        raise InvalidArgument("y must be nonzero")
    K = float(curvature(d, y))
    if K < k_floor:
        raise PrecisionFailure(f"curvature {K:.3g} below floor {k_floor:.3g}")
    vmax = max(float(np.hypot(*np.asarray(v1, float))), float(np.hypot(*np.asarray(v2, float))))
    h = 1e-2 * K * K * float(np.hypot(*y)) / vmax
    if dps is None:
        # cancellation in an order-(q+2) difference costs about (q+2) log10(1/h) digits
        dps = 40 + int(math.ceil((q + 2) * max(0.0, -math.log10(h / 2**levels))))
    with mp.workdps(dps):
        Y = [mp.mpf(float(c)) for c in y]
        V1 = [mp.mpf(float(c)) for c in v1]
        V2 = [mp.mpf(float(c)) for c in v2]

        def F(u1, u2):
            return _support_mp(d, Y[0] + u1 * V1[0] + u2 * V2[0], Y[1] + u1 * V1[1] + u2 * V2[1])

        g11, _ = mixed_partial_mp(F, 3, q - 1, h, levels)
        g12, _ = mixed_partial_mp(F, 2, q, h, levels)
        g22, _ = mixed_partial_mp(F, 1, q + 1, h, levels)
        det = g11 * g22 - g12 * g12
        out = float(det)
        entries = (float(g11), float(g12), float(g22))
    return (out, entries) if return_entries else out


@dataclass(frozen=True)
class TrendRow:
    K: float
    N: int
    hq: float
    normalised: float


def hq_curvature_trend(domain: Domain, normal_angles, q: int, k_floor: float = 1e-3) -> list[TrendRow]:
    """``|h_q(xi, v1*, v2*)| K^{8q^2+16q+2}`` along the given normals.

    Near a flat normal ``K`` shrinks; the normalised column should stay
    bounded away from zero.  Reports observed values only.
    """
    rows = []
    for ang in normal_angles:
        xi = np.array([math.cos(ang), math.sin(ang)])
        K = float(curvature(domain, xi))
        vs = construct_vstar(xi, q, K)
        hq = hq_determinant(domain, xi, vs.v1, vs.v2, q, k_floor=k_floor)
        rows.append(TrendRow(K, vs.N, hq, abs(hq) * K ** (8 * q * q + 16 * q + 2)))
    return rows
