"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or incompatible input data."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a finite result."""
