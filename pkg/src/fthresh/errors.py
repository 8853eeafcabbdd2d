"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array shapes, grids or dimensions do not line up."""


class InsufficientDataError(ValueError):
    """Too few subjects or observation pairs for the requested estimate."""


class DegenerateVarianceError(ValueError):
    """A variance factor is nonpositive even after flooring."""


class ConfigError(ValueError):
    """Invalid run configuration (split sizes, grids, layouts)."""


class FormatError(ValueError):
    """An input file is unreadable or does not follow the documented layout."""
