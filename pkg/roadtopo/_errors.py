"""Exception hierarchy shared by every roadtopo module."""


class RoadTopoError(Exception):
    """Base class for data errors raised by roadtopo."""


class FormatError(RoadTopoError, ValueError):
    """A file or document does not follow its documented format."""


class DomainError(RoadTopoError, ValueError):
    """A value lies outside the domain an operation accepts."""


class ShapeError(RoadTopoError, ValueError):
    """Array or pyramid dimensions are inconsistent."""


class GraphReferenceError(RoadTopoError, ValueError):
    """A graph record references a node that does not exist."""


__all__ = [
    "DomainError",
    "FormatError",
    "GraphReferenceError",
    "RoadTopoError",
    "ShapeError",
]
