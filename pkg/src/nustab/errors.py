"""Exception hierarchy.

Two families map onto the CLI exit codes: ``ValidationError`` (bad input,
exit 2) and ``SynthesisError`` (the design pipeline could not produce a
result, exit 3).
"""


class NustabError(Exception):
    """Base class for all library errors."""


class ValidationError(NustabError, ValueError):
    pass


class SynthesisError(NustabError, ArithmeticError):
    pass


class ParseError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class RankError(ValidationError):
    pass


class StabilizabilityError(ValidationError):
    pass


class SpectrumError(ValidationError):
    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class WindowError(ValidationError):
    pass


class PeriodOutOfCertificateError(ValidationError):
    pass


class ControllabilityError(SynthesisError):
    pass


class PlacementError(SynthesisError):
    pass


class DegenerateEigenvectorError(SynthesisError):
    pass


class InterlacingError(SynthesisError):
    pass


class PostCheckError(SynthesisError):
    pass


class InfeasibleAtPeriodError(SynthesisError):
    pass


class NoStabilizablePeriodError(SynthesisError):
    pass


class NoCrossingError(SynthesisError):
    """No crossing of the threshold below the search limit.

    Carries the right-censored bound in ``h_star``.
    """

    def __init__(self, message, h_star):
        super().__init__(message)
        self.h_star = h_star
