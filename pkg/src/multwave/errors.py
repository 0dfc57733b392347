"""Exception hierarchy shared by all modules."""


class MultwaveError(Exception):
    """Base class for package errors."""


class ShapeError(MultwaveError, ValueError):
    """Input length or level layout is inconsistent."""


class UnsupportedOrderError(MultwaveError, ValueError):
    """Requested Daubechies order has no embedded filter."""


class FilterInvalidError(MultwaveError, ArithmeticError):
    """Filter fails its invariants or the cascade cannot be initialised."""


class CatalogError(MultwaveError, KeyError):
    """Unknown test-function or noise-function name."""


class ConfigError(MultwaveError, ValueError):
    """Configuration violates its invariants."""


class DomainError(MultwaveError, ValueError):
    """Evaluation point outside [0, 1)."""


class DegenerateInputError(MultwaveError, ValueError):
    """Nothing to select from."""
