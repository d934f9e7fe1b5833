"""Exception hierarchy shared across the pipeline."""


class PhenotextError(Exception):
    """Base class for all pipeline errors."""


class DataError(PhenotextError):
    """Malformed input data: bad records, labels, file formats."""


class ConfigError(PhenotextError):
    """Invalid configuration or argument values."""


class ConvergenceError(PhenotextError):
    """An iterative solver failed to reach its tolerance."""
