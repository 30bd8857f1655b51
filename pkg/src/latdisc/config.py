"""Domain strings and ``key = value`` experiment configuration.

Domain grammar::

    domain  := "disk" [":" params] | "superellipse" [":" params]
    params  := key "=" number ("," key "=" number)*

``disk`` accepts ``r`` (radius, default 1) and ``theta``.  ``superellipse``
accepts ``omega`` (even integer >= 2, default 4), ``a``, ``b`` (default 1)
and ``theta`` (default 0).  Whitespace around tokens is ignored.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .geometry import RotatedDomain, SuperellipseDomain

MODES = ("scaling", "randol", "fourier-profile", "poisson-sandwich", "vdc")
J_MAX_LIMIT = 16


def _num(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InvalidArgument(f"bad number for {key!r}: {text!r}") from None


def parse_domain(spec: str) -> RotatedDomain:
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    params: dict[str, float] = {}
    if rest.strip():
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            key = key.strip().lower()
            if not sep or not key:
                raise InvalidArgument(f"bad domain parameter {item!r}")
            if key in params:
                raise InvalidArgument(f"duplicate domain parameter {key!r}")
            params[key] = _num(val.strip(), key)
    theta = params.pop("theta", 0.0)
    if kind == "disk":
        r = params.pop("r", 1.0)
        base = SuperellipseDomain(2, r, r)
    elif kind == "superellipse":
        omega = params.pop("omega", 4.0)
        if not float(omega).is_integer():
            raise InvalidArgument("omega must be an integer")
        base = SuperellipseDomain(int(omega), params.pop("a", 1.0), params.pop("b", 1.0))
    else:
        raise InvalidArgument(f"unknown domain kind {kind!r}")
    if params:
        raise InvalidArgument(f"unknown domain parameters {sorted(params)}")
    return RotatedDomain(base, theta)


def format_domain(d: RotatedDomain) -> str:
    b = d.base
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    return f"superellipse:omega={b.omega},a={g(b.a)},b={g(b.b)},theta={g(d.theta)}"


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    domain: str = "superellipse:omega=4,a=1,b=1,theta=0"
    theta_count: int = 0
    seed: int = 0
    thetas: tuple = ()
    j_min: int = 6
    j_max: int = 14
    samples: int = 64
    out: str = "-"
    workers: int = 1
    q: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.j_max > J_MAX_LIMIT:
            raise InvalidArgument(f"j_max must be <= {J_MAX_LIMIT}")
        if self.j_min < 1 or self.j_min > self.j_max:
            raise InvalidArgument("need 1 <= j_min <= j_max")
        if self.samples < 1 or self.theta_count < 0 or self.workers < 1:
            raise InvalidArgument("samples and workers must be positive, theta_count nonnegative")
        parse_domain(self.domain)

    def domain_obj(self) -> RotatedDomain:
        return parse_domain(self.domain)

    def theta_values(self) -> list[float]:
        """Explicit list, else ``theta_count`` seeded draws in ``[0, pi/2)``, else the domain's own angle."""
        if self.thetas:
            return [float(t) for t in self.thetas]
        if self.theta_count:
            rng = np.random.default_rng(self.seed)
            return [float(v) for v in rng.uniform(0.0, math.pi / 2, self.theta_count)]
        return [self.domain_obj().theta]

    def as_lines(self) -> list[str]:
        """``key = value`` lines for every field except the output path."""
        out = []
        for f in dataclasses.fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if f.name == "thetas":
                v = ",".join(format(float(t), ".17g") for t in v)
            out.append(f"{f.name} = {v}")
        return out


_INT_KEYS = {"theta_count", "seed", "j_min", "j_max", "samples", "workers", "q"}
_ALIASES = {"jmin": "j_min", "jmax": "j_max", "theta-count": "theta_count", "j-min": "j_min", "j-max": "j_max"}


def _coerce(key: str, value):
    if key in _INT_KEYS:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise InvalidArgument(f"{key} must be an integer") from None
    if key == "thetas":
        if isinstance(value, str):
            return tuple(_num(v.strip(), key) for v in value.split(",") if v.strip())
        return tuple(float(v) for v in value)
    return value


def read_config_file(path: str | Path) -> dict:
    values = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise InvalidArgument(f"{path}:{n}: expected 'key = value'")
        values[key.strip()] = val.strip()
    return values


def build_config(values: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kw = {}
    for k, v in values.items():
        k = _ALIASES.get(k, k)
        if k not in known:
            raise InvalidArgument(f"unknown config key {k!r}")
        kw[k] = _coerce(k, v)
    if "mode" not in kw:
        raise InvalidArgument("mode is required")
    return ExperimentConfig(**kw)
