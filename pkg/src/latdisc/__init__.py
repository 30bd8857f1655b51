"""Lattice points in rotated superellipses: exact counts, Fourier transforms of
the indicator, smoothed counting and exponential-sum tools."""

__version__ = "0.1.0"

from .errors import CostGuardExceeded, InvalidArgument, OutOfRange, PrecisionFailure  # noqa: E402
from .geometry import RotatedDomain, SuperellipseDomain, disk  # noqa: E402

__all__ = [
    "__version__",
    "CostGuardExceeded",
    "InvalidArgument",
    "OutOfRange",
    "PrecisionFailure",
    "RotatedDomain",
    "SuperellipseDomain",
    "disk",
]
