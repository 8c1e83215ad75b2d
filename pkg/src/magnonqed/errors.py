"""Exception and warning classes shared across the package."""


class InputError(ValueError):
    """Rejected input: bad labels, shapes, schema violations, invalid physics regimes."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (eigensolver, linear solve, bracket search)."""


class LabelingError(NumericalError):
    """Dressed eigenstates could not be assigned unique bare labels."""


class TruncationWarning(UserWarning):
    """Population leaks into the top levels of a truncated Fock space."""


class RegimeWarning(UserWarning):
    """Inputs sit outside the regime where an analytical model is trustworthy."""
