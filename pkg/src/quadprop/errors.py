"""Exception types shared across the toolkit."""


class QuadpropError(Exception):
    """Base class for all toolkit errors."""


class DegenerateQuad(QuadpropError):
    """Four points that cannot form a polygon with positive area."""


class ShapeError(QuadpropError):
    """Tensor or grid dimensions violate an operation's contract."""


class ParseError(QuadpropError):
    """Malformed record in an annotation or detection file."""


class ConfigError(QuadpropError):
    """Invalid configuration value or combination."""


class PlacementError(QuadpropError):
    """Scene generator could not place objects under its overlap budget."""
