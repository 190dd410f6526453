"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DegeneratePostSelectionError(DomainError):
    """The post-selection amplitude vanishes, so the weak value is undefined."""

    def __init__(self, message, ell=None):
        super().__init__(message)
        self.ell = ell


class InsufficientSignalError(DomainError):
    """Counts left after nuisance subtraction cannot support an estimate."""

    def __init__(self, message, ell=None):
        super().__init__(message)
        self.ell = ell


class DegenerateWeightsError(DomainError):
    """Zero uncertainties were supplied for data that a model cannot match."""


class FitFailureError(RuntimeError):
    """A fit did not converge; ``last`` carries the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class SamplingError(DomainError):
    """A grid is too coarse for the requested field or propagation."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` is the dotted key path."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class MissingInputError(FileNotFoundError):
    """A required member of a result bundle is absent."""
