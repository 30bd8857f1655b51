"""Batch experiments behind the ``latdisc`` command.

Every output starts with ``#`` comment lines carrying the package version, the
full configuration and run metadata.  The CSV body follows.  Identical
configurations give identical bytes.
"""
from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from . import __version__, counting, expsum, fourier, poisson
from .config import ExperimentConfig, format_domain
from .errors import InvalidArgument
from .geometry import RotatedDomain, flat_points

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MIN_BLOCKS = 4
RANDOL_TOL = 0.05
VDC_STEP_FACTOR = 4.0


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    n: int


def fit_exponent(pairs) -> ExponentFit:
    """Least-squares slope of ``(log t, log sup)`` pairs with its standard error."""
    pts = np.asarray(list(pairs), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < MIN_BLOCKS:
        raise InvalidArgument(f"need at least {MIN_BLOCKS} blocks")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgument("non-finite input")
    if np.ptp(pts[:, 0]) == 0:
        raise InvalidArgument("slope undefined: all abscissae equal")
    f = linregress(pts[:, 0], pts[:, 1])
    return ExponentFit(float(f.slope), float(f.stderr), int(pts.shape[0]))


def block_samples(j: int, n: int) -> np.ndarray:
    """``n`` points of ``[2^j, 2^(j+1))`` at golden-ratio fractional offsets."""
    k = np.arange(1, n + 1, dtype=float)
    return 2.0**j * (1.0 + np.mod(k * GOLDEN, 1.0))


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingRow:
    theta: float
    j: int
    samples: int
    failures: int
    retries: int
    sup_remainder: float
    sup_norm: float
    fitted_exponent: float = math.nan
    exponent_se: float = math.nan


def _block(args):
    d, j, n = args
    sup_p = sup_norm = 0.0
    fails = retries = 0
    for t in block_samples(j, n):
        res, r = counting.certified_count(d, float(t))
        retries += r
        if res.ambiguous:
            fails += 1
            log.warning("ambiguous count at t=%r theta=%r after %d retries; sample dropped", t, d.theta, r)
            continue
        if r:
            log.info("t=%r theta=%r certified after %d retries", t, d.theta, r)
        p = abs(res.remainder)
        sup_p = max(sup_p, p)
        sup_norm = max(sup_norm, p / res.t ** (2.0 / 3.0))
    return ScalingRow(d.theta, j, n - fails, fails, retries, sup_p, sup_norm)


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def scaling_rows(domain: RotatedDomain, thetas, j_min: int, j_max: int, samples: int,
                 workers: int = 1) -> list[ScalingRow]:
    if j_max - j_min + 1 < MIN_BLOCKS:
        raise InvalidArgument(f"need at least {MIN_BLOCKS} dyadic blocks")
    tasks = [(RotatedDomain(domain.base, float(th)), j, samples) for th in thetas for j in range(j_min, j_max + 1)]
    raw = _pmap(_block, tasks, workers)
    out = []
    per = j_max - j_min + 1
    for i in range(0, len(raw), per):
        rows = raw[i:i + per]
        fit = fit_exponent([(r.j * math.log(2.0), math.log(r.sup_remainder)) for r in rows])
        out += [ScalingRow(**{**r.__dict__, "fitted_exponent": fit.slope, "exponent_se": fit.stderr}) for r in rows]
    return out


def exponents_by_theta(rows) -> dict[float, float]:
    return {r.theta: r.fitted_exponent for r in rows}


SCALING_CSV_FIELDS = ("omega", "theta", "j", "samples", "failures", "retries", "sup_remainder", "sup_norm",
                      "fitted_exponent", "exponent_se")


def _g(v) -> str:
    return format(float(v), ".17g")


def run_scaling(cfg: ExperimentConfig) -> tuple[str, bool]:
    """Returns ``(csv_text, ok)``; ``ok`` is False if any fitted exponent leaves ``(0, 1)``."""
    d = cfg.domain_obj()
    rows = scaling_rows(d, cfg.theta_values(), cfg.j_min, cfg.j_max, cfg.samples, cfg.workers)
    buf = io.StringIO()
    buf.write(",".join(SCALING_CSV_FIELDS) + "\n")
    for r in rows:
        buf.write(",".join([str(d.omega), _g(r.theta), str(r.j), str(r.samples), str(r.failures), str(r.retries),
                            _g(r.sup_remainder), _g(r.sup_norm), _g(r.fitted_exponent), _g(r.exponent_se)]) + "\n")
    ok = all(0.0 < r.fitted_exponent < 1.0 for r in rows)
    return buf.getvalue(), ok


# ---------------------------------------------------------------- other modes


def expected_randol_slope(omega: int) -> float:
    return -(omega - 2) / (2.0 * (omega - 1))


def run_randol(cfg: ExperimentConfig) -> tuple[str, bool]:
    base = cfg.domain_obj().base
    buf = io.StringIO()
    buf.write("omega,theta,slope,stderr,expected,r_max\n")
    ok = True
    for th in cfg.theta_values():
        fit = fourier.randol_slope(RotatedDomain(base, th))
        exp_ = expected_randol_slope(base.omega)
        ok &= abs(fit.slope - exp_) <= RANDOL_TOL
        buf.write(",".join([str(base.omega), _g(th), _g(fit.slope), _g(fit.stderr), _g(exp_), _g(fit.r_max)]) + "\n")
    return buf.getvalue(), ok


def profile_angles(d: RotatedDomain, n: int = 8) -> list[float]:
    """``n`` angles with ``delta >= 0.5`` plus every flat normal."""
    angs = [float(a) for a in fourier.default_xi_angles(d, n=n)]
    angs += [math.atan2(f.normal[1], f.normal[0]) for f in flat_points(d)]
    return angs


def run_fourier_profile(cfg: ExperimentConfig) -> tuple[str, bool]:
    lambdas = fourier.log_grid(50.0, 1000.0)
    rows = []
    for th in cfg.theta_values():
        d = RotatedDomain(cfg.domain_obj().base, th)
        for a in profile_angles(d):
            rows += fourier.profile_rows(d, a, lambdas)
    return fourier.profile_csv(rows), True


def run_poisson_sandwich(cfg: ExperimentConfig) -> tuple[str, bool]:
    base = cfg.domain_obj().base
    results = []
    for th in cfg.theta_values():
        d = RotatedDomain(base, th)
        for j in range(cfg.j_min, cfg.j_max + 1):
            for t in block_samples(j, cfg.samples):
                results.append(poisson.sandwich(d, float(t), float(t) ** (-1.0 / 3.0)))
    text = poisson.sandwich_csv(results)
    # add the verdict column
    lines = text.splitlines()
    lines[0] += ",holds"
    for i, r in enumerate(results, 1):
        lines[i] += f",{int(r.holds)}"
    return "\n".join(lines) + "\n", all(r.holds for r in results)


VDC_PHASE = expsum.X1**2 + expsum.X1 * expsum.X2 / 3 + 2 * expsum.X2**2 + expsum.X1**3 / 5


def vdc_battery(q_max: int, j_min: int, j_max: int) -> list[expsum.VdcReport]:
    """Fixed battery: for each ``q`` and ``M* = 2^j`` the step ``H`` doubles from 2 to ``M*/4``."""
    phase = expsum.Phase(VDC_PHASE)
    G = expsum.radial_bump(0.9)
    shifts = [(1, 0), (0, 1), (1, 1)]
    reports = []
    for q in range(1, q_max + 1):
        for j in range(j_min, j_max + 1):
            M = 2.0**j
            inst = expsum.ExpSumInstance(T=M * M / 8, M_star=M, G=G, F=phase)
            H = 2.0
            while H <= M / 4:
                reports.append(expsum.vdc_inequality_report(inst, q, shifts[:q], H))
                H *= 2
    return reports


def vdc_stable(reports) -> bool:
    """Finite ratios that move by at most a factor ``VDC_STEP_FACTOR`` per doubling of ``H``."""
    prev = None
    for r in reports:
        if not math.isfinite(r.ratio):
            return False
        key = (r.q, r.M_star)
        if prev is not None and prev[0] == key and prev[1] > 0 and r.ratio > VDC_STEP_FACTOR * prev[1]:
            return False
        prev = (key, r.ratio)
    return True


def run_vdc(cfg: ExperimentConfig) -> tuple[str, bool]:
    if 2.0**cfg.j_max > expsum.M_STAR_MAX:
        raise InvalidArgument("vdc mode needs 2^j_max <= M* limit")
    reports = vdc_battery(cfg.q, cfg.j_min, cfg.j_max)
    return expsum.vdc_csv(reports), vdc_stable(reports)


_RUNNERS = {
    "scaling": run_scaling,
    "randol": run_randol,
    "fourier-profile": run_fourier_profile,
    "poisson-sandwich": run_poisson_sandwich,
    "vdc": run_vdc,
}


def header(cfg: ExperimentConfig) -> str:
    omega = cfg.domain_obj().omega
    lines = [f"latdisc {__version__}", f"domain (normalised) = {format_domain(cfg.domain_obj())}"]
    lines += cfg.as_lines()
    lines.append(f"zeta = 1/3831 = {_g(poisson.ZETA)}")
    lines.append(f"sigma(omega={omega}) = {_g(poisson.sigma(omega))}")
    lines.append(f"b = {poisson.LOG_EXPONENT_B}")
    lines.append("caveat: the sup over all t >= 2 is truncated to the sampled dyadic blocks; "
                 "no convergence rate is known for this truncation")
    return "".join(f"# {ln}\n" for ln in lines)


def run_mode(cfg: ExperimentConfig) -> tuple[str, bool]:
    """Full output text (header plus CSV) and the acceptance verdict."""
    try:
        runner = _RUNNERS[cfg.mode]
    except KeyError:
        raise InvalidArgument(f"unknown mode {cfg.mode!r}") from None
    body, ok = runner(cfg)
    return header(cfg) + body, ok
