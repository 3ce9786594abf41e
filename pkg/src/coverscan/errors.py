"""Exception types raised across the package."""


class CoverscanError(Exception):
    """Base class for all errors raised by this package."""


class ImageError(CoverscanError):
    """Unreadable, unsupported or malformed raster input."""


class GeometryError(CoverscanError):
    """Out-of-bounds patch/rectangle or a singular transform."""


class DetectorError(CoverscanError):
    """Image unsuitable for a detector (e.g. below minimum size)."""


class MatchError(CoverscanError):
    """Descriptor kind/length mismatch or an unusable descriptor set."""


class IndexFormatError(CoverscanError):
    """Reference index file is corrupt, truncated or of an unknown version."""


class ConfigError(CoverscanError):
    """Inconsistent configuration, e.g. detector mismatch between index and query."""
