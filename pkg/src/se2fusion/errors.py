"""Exception types shared across the package."""


class UnknownNodeError(ValueError):
    """An edge endpoint refers to a node id that is not in the graph."""


class BadInformationError(ValueError):
    """An information matrix is asymmetric or has a negative diagonal entry."""


class GaugeUnderconstrainedError(ValueError):
    """Optimization was requested on a graph with no fixed node."""


class SingularSystemError(RuntimeError):
    """The normal equations could not be factorized even after regularization."""


class InsufficientCoverageError(ValueError):
    """The odometry stream leaves a gap too wide to integrate across."""


class TooFewReadingsError(ValueError):
    """Graph construction needs at least two accepted GNSS readings."""


class OutOfUtmDomainError(ValueError):
    """Latitude outside the band where the UTM projection is defined."""


class MixedUtmZonesError(ValueError):
    """A dataset's fixes project into more than one UTM zone."""


class NonMonotonicTimestampsError(ValueError):
    """Timestamps in an input stream are not strictly increasing."""


class ParseError(ValueError):
    """An input file could not be parsed; the message names the line."""


class EmptyInputError(ValueError):
    """A metric was requested over an empty pose list."""


class NeedTwoPosesError(ValueError):
    """Precision is undefined for fewer than two poses."""


class DivisionByZeroMetricError(ValueError):
    """Improvement percentages are undefined when a baseline metric is zero."""
