"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented constraint (bad distribution, bad family, ...)."""


class InfiniteDivergenceError(ArithmeticError):
    """The two distributions have disjoint support, so the divergence is infinite.

    Raised instead of returning ``inf`` so callers can tell it apart from a
    floating point overflow.
    """


class InstanceTooLargeError(ValidationError):
    """Exact enumeration would exceed its configured cap."""
