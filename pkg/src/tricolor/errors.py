"""Exception hierarchy shared by all modules.

Parameter and input problems derive from :class:`ParameterError` (CLI exit
code 2); failures of the physical model derive from :class:`ModelError`
(CLI exit code 3).
"""


class TricolorError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(TricolorError, ValueError):
    """Invalid parameter, configuration value or malformed input."""


class InsufficientDataError(ParameterError):
    """Too few samples to form the requested estimate."""


class StepSizeError(ParameterError):
    """Integration step too coarse for the fastest rate of the model."""


class AliasingError(ParameterError):
    """Sampling or decimation settings would alias the band of interest."""


class ModelError(TricolorError):
    """The physical model cannot be evaluated for the given inputs."""


class NoOscillationError(ModelError):
    """The OPO is below threshold (or has no stable oscillating state)."""


class DegeneratePumpError(ModelError, ValueError):
    """Pump amplitude variance is not strictly positive."""


class UnphysicalCovarianceError(ModelError, ValueError):
    """A covariance matrix violates symmetry or positivity."""


class MalformedInputError(ParameterError):
    """Unparsable configuration or data file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line=None, source=None):
        where = ""
        if source is not None:
            where = f"{source}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.source = source
