class NumericalError(ArithmeticError):
    """A computation left its numerically valid regime (singular filter, divergence)."""
