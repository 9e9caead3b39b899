class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails or produces an unphysical result."""
