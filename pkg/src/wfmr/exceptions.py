"""Exception types raised by the library.

Every error raised on bad input or a degenerate numerical state derives from
:class:`WfmrError`, so callers can catch one base class.  The CLI maps these
onto its exit codes (usage / data / numerical failure).
"""


class WfmrError(Exception):
    """Base class for all library errors."""


class InvalidLength(WfmrError):
    """Signal length is not a power of two."""


class InvalidDepth(WfmrError):
    """Decomposition floor j0 is incompatible with the signal length."""


class InvalidShape(WfmrError):
    """Array dimensions do not agree (ragged curves, mismatched Y/Z, ...)."""


class InvalidParams(WfmrError):
    """Mixture parameters violate their constraints (e.g. nonpositive scale)."""


class InvalidPenalty(WfmrError):
    """Penalty strength is negative."""


class TooFewObservations(WfmrError):
    """Fewer observations than mixture components."""


class DegenerateComponent(WfmrError):
    """A component lost all responsibility mass or weighted signal."""


class NumericalFailure(WfmrError):
    """The optimizer produced a non-finite objective.

    Carries the objective trace accumulated up to the failing iteration.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class InvalidDesign(WfmrError):
    """Design matrix unusable for penalty-grid construction (all zero)."""


class InvalidTarget(WfmrError):
    """Signal-to-noise target outside (0, 1)."""


class ParseError(WfmrError):
    """A data file contains a non-numeric or malformed cell."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class InvalidGrid(WfmrError):
    """Sampling grid is not strictly increasing."""


class UndefinedMetric(WfmrError):
    """A relative error metric has a zero denominator."""
