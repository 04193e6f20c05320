class CoverlabError(Exception):
    """Base class for all errors raised by the package."""


class GraphParseError(CoverlabError):
    pass


class GraphValidationError(CoverlabError):
    pass


class InvalidParamsError(CoverlabError, ValueError):
    pass


class GenerationError(CoverlabError):
    pass


class SizeError(CoverlabError):
    """Dense exact computation requested beyond the supported size."""


class NumericalError(CoverlabError):
    pass


class InsufficientTrialsError(CoverlabError, ValueError):
    pass


class ConfigError(CoverlabError, ValueError):
    pass
