"""Exact lattice-point counts of ``t * B_theta`` and the remainder ``P(t)``.

Membership of a lattice point ``k`` is decided by the sign of the excess
``g(k) - t**omega`` where ``g`` is the superellipse membership function of the
rotated domain; the dilate is closed, so zero excess counts as inside.  A
point whose excess is smaller in magnitude than ``eta = 1e-9 * t**(omega-1)``
makes the count *ambiguous*: the result is returned but flagged, and callers
retry at ``t + 1e-7`` (see :func:`certified_count`).

For ``theta == 0``, integer ``t`` and integer semi-axes the decision is made in
exact integer arithmetic and is never ambiguous.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .errors import CostGuardExceeded, InvalidArgument, PrecisionFailure
from .geometry import Domain, RotatedDomain, SuperellipseDomain, as_rotated, gauss_points, support

ETA_REL = 1e-9
RETRY_DT = 1e-7
BRUTE_T_MAX = 2000.0
_NEWTON_MAXITER = 200


@dataclass(frozen=True)
class CountResult:
    t: float
    count: int
    area_term: float
    remainder: float
    min_margin: float
    ambiguous: bool


def area(domain: Domain) -> float:
    """``4ab Gamma(1+1/w)^2 / Gamma(1+2/w)``; rotation does not change it."""
    base = as_rotated(domain).base
    w = base.omega
    return float(4 * base.a * base.b * gamma(1 + 1 / w) ** 2 / gamma(1 + 2 / w))


def margin_threshold(omega: int, t: float) -> float:
    return ETA_REL * t ** (omega - 1)


def _result(domain: RotatedDomain, t: float, count: int, min_margin: float, eta: float) -> CountResult:
    a_t = area(domain) * t * t
    return CountResult(
        t=float(t),
        count=int(count),
        area_term=a_t,
        remainder=count - a_t,
        min_margin=float(min_margin),
        ambiguous=bool(min_margin < eta),
    )


def _integer_path_ok(d: RotatedDomain, t: float) -> bool:
    base = d.base
    return (
        d.theta == 0.0
        and float(t).is_integer()
        and float(base.a).is_integer()
        and float(base.b).is_integer()
    )


def _iroot(n: int, k: int) -> int:
    """Floor of the k-th root of a nonnegative integer."""
    if n <= 0:
        return 0
    r = int(round(float(n) ** (1.0 / k)))
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


def _count_integer(d: RotatedDomain, t: float) -> CountResult:
    base = d.base
    w, a, b, T = base.omega, int(base.a), int(base.b), int(t)
    big = (a * b * T) ** w
    scale = float((a * b) ** w)
    total = 0
    margin = math.inf
    for n2 in range(-b * T, b * T + 1):
        rem = big - (n2 * a) ** w
        m = _iroot(rem, w) // b
        total += 2 * m + 1
        # exact excess of the last point inside and the first point outside
        e_in = rem - (m * b) ** w
        e_out = ((m + 1) * b) ** w - rem
        margin = min(margin, e_in / scale, e_out / scale)
    # exact arithmetic: margin is reported but never makes the result ambiguous
    return _result(d, t, total, margin, eta=-1.0)


def _frame(d: RotatedDomain):
    """Pick the scan direction: rows run along the longer extent."""
    e1, e2 = np.eye(2)
    ext_x = support(d, e1) + support(d, -e1)
    ext_y = support(d, e2) + support(d, -e2)
    if ext_y <= ext_x:
        return e1, e2
    return e2, e1


def count_exact(domain: Domain, t: float) -> CountResult:
    """Lattice points in the closed dilate ``t * B_theta``, row by row.

    Each row's chord endpoints are found by Newton's method on the gauge
    ``g**(1/omega)`` (convex and degree-one homogeneous, started from outside
    so the iteration is monotone), and the integer endpoints are then certified
    by direct membership evaluation with margin ``eta``.
    """
    d = as_rotated(domain)
    if not t >= 1:
        raise InvalidArgument("count_exact requires t >= 1")
    if _integer_path_ok(d, t):
        return _count_integer(d, t)

    w = d.omega
    tw = float(t) ** w
    eta = margin_threshold(w, t)
    along, perp = _frame(d)
    base = d.base
    R = d.R

    def excess(p, q):
        pts = p[..., None] * along + q[..., None] * perp
        u = pts @ R
        return base.membership(u[..., 0], u[..., 1]) - tw

    def gauge_and_slope(p, q):
        pts = p[..., None] * along + q[..., None] * perp
        u = pts @ R
        ua, ub = u[..., 0] / base.a, u[..., 1] / base.b
        g = ua**w + ub**w
        grad_u = np.stack([w * ua ** (w - 1) / base.a, w * ub ** (w - 1) / base.b], axis=-1)
        dg = (grad_u @ R.T) @ along
        rho = g ** (1.0 / w)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = rho / (w * g) * dg
        return rho, slope

    q_lo = math.ceil(-t * support(d, -perp))
    q_hi = math.floor(t * support(d, perp))
    if q_hi < q_lo:
        return _result(d, t, 0, math.inf, eta)
    q = np.arange(q_lo, q_hi + 1, dtype=float)

    top, bot = gauss_points(d, np.array([perp, -perp]))
    m = np.where(q > 0, q * (top @ along) / (top @ perp), np.where(q < 0, q * (bot @ along) / (bot @ perp), 0.0))
    rho_min, _ = gauge_and_slope(m, q)
    hit = rho_min <= t
    margins = []

    # rows that miss the dilate: certify the two lattice points nearest the row
    # minimum; a tangent row where roundoff disagrees is handed to Newton instead
    if np.any(~hit):
        idx = np.flatnonzero(~hit)
        qm, mm = q[idx], m[idx]
        e_lo, e_hi = excess(np.floor(mm), qm), excess(np.ceil(mm), qm)
        touched = (e_lo <= 0) | (e_hi <= 0)
        hit[idx[touched]] = True
        keep = ~touched
        if keep.any():
            margins.append(min(np.min(np.abs(e_lo[keep])), np.min(np.abs(e_hi[keep]))))

    counts = np.zeros(q.size, dtype=np.int64)
    if np.any(hit):
        qh = q[hit]
        right = _newton_outside(gauge_and_slope, np.full(qh.shape, t * support(d, along) + 1.0), qh, t)
        left = _newton_outside(gauge_and_slope, np.full(qh.shape, -t * support(d, -along) - 1.0), qh, t)
        mh = m[hit]
        # a tangent row may leave Newton without a real root; restart from the minimum
        right = np.where(np.isfinite(right), right, mh)
        left = np.where(np.isfinite(left), left, mh)
        r_int = _certify_end(excess, np.floor(right), qh, mh, +1)
        l_int = _certify_end(excess, np.ceil(left), qh, mh, -1)
        for p in (r_int, r_int + 1, l_int, l_int - 1):
            margins.append(np.min(np.abs(excess(p, qh))))
        counts[hit] = np.maximum(r_int - l_int + 1, 0).astype(np.int64)

    min_margin = float(min(margins)) if margins else math.inf
    return _result(d, t, int(counts.sum()), min_margin, eta)


def _newton_outside(fun, p, q, t):
    p = p.copy()
    active = np.ones(p.shape, dtype=bool)
    tol = 1e-12 * max(1.0, t)
    for _ in range(_NEWTON_MAXITER):
        rho, slope = fun(p[active], q[active])
        step = (rho - t) / slope
        p[active] -= step
        still = np.abs(step) > tol
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
        if not active.any():
            break
    return p


def _certify_end(excess, p, q, m, direction: int):
    """Settle integer chord ends by direct membership.

    ``p + direction`` must be outside; ``p`` must be inside unless it lies on
    the far side of the row minimum ``m`` (then the chord holds no integer).
    """
    p = p.copy()
    for _ in range(8):
        grow = excess(p + direction, q) <= 0
        p[grow] += direction
        shrink = (excess(p, q) > 0) & (direction * (p - m) >= 0)
        p[shrink] -= direction
        if not (grow.any() or shrink.any()):
            return p
    raise PrecisionFailure("row endpoint certification did not settle")


def count_brute(domain: Domain, t: float) -> int:
    """O(t^2) scan of the bounding box; oracle for :func:`count_exact`."""
    return brute_result(domain, t).count


def brute_result(domain: Domain, t: float) -> CountResult:
    d = as_rotated(domain)
    if t > BRUTE_T_MAX:
        raise CostGuardExceeded(f"count_brute refuses t={t} > {BRUTE_T_MAX}")
    if t <= 0:
        raise InvalidArgument("t must be positive")
    e1, e2 = np.eye(2)
    x_lo, x_hi = math.floor(-t * support(d, -e1)) - 1, math.ceil(t * support(d, e1)) + 1
    y_lo, y_hi = math.floor(-t * support(d, -e2)) - 1, math.ceil(t * support(d, e2)) + 1
    xs = np.arange(x_lo, x_hi + 1)
    w = d.omega

    if _integer_path_ok(d, t):
        a, b, T = int(d.base.a), int(d.base.b), int(t)
        big = (a * b * T) ** w
        dtype = np.int64 if big < 2**62 else object
        X = xs.astype(dtype)
        total, margin = 0, math.inf
        for y in range(y_lo, y_hi + 1):
            e = (X * b) ** w + (y * a) ** w - big
            total += int(np.sum(e <= 0))
            margin = min(margin, float(np.min(np.abs(e))) / (a * b) ** w)
        return _result(d, t, total, margin, eta=-1.0)

    tw = float(t) ** w
    total, margin = 0, math.inf
    for y in range(y_lo, y_hi + 1):
        e = d.membership(xs.astype(float), np.full(xs.shape, float(y))) - tw
        total += int(np.sum(e <= 0))
        margin = min(margin, float(np.min(np.abs(e))))
    return _result(d, t, total, margin, margin_threshold(w, t))


def remainder(domain: Domain, t: float) -> CountResult:
    """``#(tB_theta ∩ Z^2) - area(B) t^2`` with its certification flag."""
    return count_exact(domain, t)


def certified_count(domain: Domain, t: float, max_retries: int = 5, dt: float = RETRY_DT):
    """Count, perturbing ``t`` upward by ``dt`` while the result is ambiguous.

    Returns ``(result, retries)``; ``result.ambiguous`` is still True if every
    retry failed.
    """
    res = count_exact(domain, t)
    retries = 0
    while res.ambiguous and retries < max_retries:
        retries += 1
        res = count_exact(domain, t + retries * dt)
    return res, retries


COUNT_CSV_FIELDS = ("omega", "theta", "t", "count", "area_term", "remainder", "ambiguous")


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def count_rows_csv(rows, out=None) -> str:
    """Write ``(domain, CountResult)`` pairs as CSV; returns the text."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COUNT_CSV_FIELDS)
    for domain, r in rows:
        d = as_rotated(domain)
        wr.writerow([d.omega, _g17(d.theta), _g17(r.t), r.count, _g17(r.area_term), _g17(r.remainder), int(r.ambiguous)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
