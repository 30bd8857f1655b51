"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised for inputs outside an operation's precondition."""


class OutOfRange(ValueError):
    """Raised when a parameter leaves the neighbourhood an operation is defined on."""


class PrecisionFailure(ArithmeticError):
    """A numerical procedure could not reach its requested accuracy."""


class CostGuardExceeded(RuntimeError):
    """A request would exceed a declared cost guard (refused, not attempted)."""
