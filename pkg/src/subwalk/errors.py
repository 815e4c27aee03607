"""Exception hierarchy for subwalk."""


class SubwalkError(Exception):
    """Base class for all library errors."""


class QuadratureError(SubwalkError):
    """Adaptive quadrature did not reach the requested tolerance.

    Carries the partial value and the residual (absolute error estimate)
    so that callers may decide whether the result is still usable.
    """

    def __init__(self, message, value=float("nan"), residual=float("inf")):
        super().__init__(f"{message} (value={value!r}, residual={residual!r})")
        self.value = value
        self.residual = residual


class InversionRangeError(SubwalkError, ValueError):
    """The target value lies outside the range reachable by bracketing."""


class NormalizationRequiredError(SubwalkError, ValueError):
    """A Laplace exponent does not satisfy phi(q) = q for the requested q."""


class TruncationError(SubwalkError):
    """The mixture over walk-step counts could not be truncated within tolerance.

    ``partial`` holds the StepDistribution computed up to the cap.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ChfDomainError(SubwalkError, ValueError):
    """Characteristic-function evaluation left its documented domain."""


class UnsupportedSamplerError(SubwalkError, NotImplementedError):
    """No exact sampler is available for the requested subordinator."""


class ConfigError(SubwalkError, ValueError):
    """Invalid run configuration (unknown id, bad value, empty sequence...)."""
