"""Exception hierarchy for the defectivity solver."""


class DefectivityError(Exception):
    """Base class for every error raised by this package."""


class NonFinite(DefectivityError):
    """An input or intermediate quantity contains NaN or Inf."""


class DegenerateSpectrum(DefectivityError):
    """Eigenvalues are too close to be matched or treated as simple."""


class AmbiguousTarget(DefectivityError):
    """Two eigenvalues are equidistant from the requested target."""


class SingularShift(DefectivityError):
    """The bordered shift ``B + y x^H`` is numerically singular."""


class SingularCapacitance(DefectivityError):
    """The small capacitance system of a low-rank update is singular."""


class IllConditionedT(DefectivityError):
    """The core factor ``T`` of a factored perturbation is near singular."""


class RankCollapse(DefectivityError):
    """A retraction produced rank-deficient orthonormal factors."""


class StepsizeUnderflow(DefectivityError):
    """No Euler step decreased ``r`` before the step size underflowed."""


class MaxStepsExceeded(DefectivityError):
    """The inner flow hit its step budget.

    Attributes
    ----------
    state : FlowState
        Best state reached before giving up.
    """

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class InnerNotConverged(MaxStepsExceeded):
    """The inner solve ended without reaching a stationary point."""


class NotStationary(DefectivityError):
    """A formula valid only at stationary points was applied elsewhere."""


class DegenerateDerivative(DefectivityError):
    """``r'(eps)`` vanishes, so the Newton-type step is undefined."""


class BracketExhausted(DefectivityError):
    """The bracket shrank below resolution without meeting the tolerance."""


class MaxOuterIterations(DefectivityError):
    """The outer iteration hit its iteration limit.

    Attributes
    ----------
    report : DistanceReport or None
        Partial history at the time of failure.
    """

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class ParseError(DefectivityError):
    """Malformed input file; ``lineno`` holds the 1-based offending line."""

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


class UnsupportedFormat(DefectivityError):
    """A well-formed Matrix Market variant that this reader does not handle."""


class SchemaError(DefectivityError):
    """A report does not satisfy the published JSON schema."""
