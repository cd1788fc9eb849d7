"""Exception types shared across the package."""


class CorpusFormatError(ValueError):
    """A corpus, vocabulary, or label file violates its documented format.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """Invalid hyperparameter combination or run configuration."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. all weights are -inf)."""


class DimensionError(ValueError):
    """Paired inputs disagree in length or shape."""


class EstimationError(RuntimeError):
    """An iterative estimator failed to produce a usable result.

    ``last_iterate`` holds the most recent parameter vector for debugging.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NumericalError(RuntimeError):
    """A non-finite quantity appeared during inference.

    ``details`` maps term or block names to their offending values.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details) if details else {}
