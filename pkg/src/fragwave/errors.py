"""Exception types shared by the library and the command line front end."""


class FragwaveError(Exception):
    """Base class for all library errors."""


class ValidationError(FragwaveError, ValueError):
    """Invalid model specification or parameter (CLI exit code 1)."""


class NumericalError(FragwaveError, RuntimeError):
    """A root bracket or bisection could not be established (CLI exit code 2)."""


class SubcriticalSpeedError(ValidationError):
    """Raised when a travelling wave is requested at a speed c <= c_pbar."""


class PopulationExtinct(FragwaveError):
    """Raised when stepping a population that has no alive blocks."""
