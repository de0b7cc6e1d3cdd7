"""Exception hierarchy shared by all graphdrift modules."""


class GraphDriftError(Exception):
    """Base class for every error raised by graphdrift."""


class InvalidInputError(GraphDriftError, ValueError):
    """An argument violates an operation's preconditions."""


class SchemaError(InvalidInputError):
    """Graphs do not share one attribute schema, or an attribute is unknown."""


class SizeLimitError(InvalidInputError):
    """An exact computation was asked for inputs above its size cap."""


class GeometryError(GraphDriftError):
    """A distance matrix is not Euclidean, or a scaling is rank deficient."""


class DegeneratePrototypesError(GraphDriftError):
    """The embedded training sample has a singular covariance."""


class DegenerateGraphError(InvalidInputError):
    """A topological feature is undefined for the given graph."""


class InsufficientSimulationsError(GraphDriftError):
    """Too few Monte-Carlo trajectories survive to estimate a tail quantile."""


class InvalidConfigError(GraphDriftError, ValueError):
    """An experiment or stream configuration is inconsistent."""


class GXLParseError(GraphDriftError):
    """A GXL/CXL file could not be parsed."""
