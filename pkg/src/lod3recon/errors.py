"""Exception hierarchy shared by all pipeline stages."""


class Lod3Error(Exception):
    """Base class for everything raised on purpose by this package."""


class ParseError(Lod3Error):
    """Malformed input file (bad token, wrong field count, unknown keyword)."""


class ValidationError(Lod3Error):
    """Well-formed data that violates a structural invariant."""


class DomainError(Lod3Error):
    """Arguments outside the mathematically meaningful range."""


class IoError(Lod3Error):
    """Missing, unreadable, or unwritable path."""


class SpecError(Lod3Error):
    """Scene or run description that cannot be realized."""


class ConfigError(Lod3Error):
    """Bad key or value in a config file or CLI argument."""


class FrameMismatch(Lod3Error):
    """Rasters that were expected to share one facade frame do not."""


class DegenerateCorrespondence(Lod3Error):
    """Point correspondences that do not determine a homography."""


class OpeningOutsideFace(Lod3Error):
    """Opening rectangle not strictly inside its host face."""


class OpeningTouchesBoundary(Lod3Error):
    """Opening rectangle closer to the face boundary than one raster cell."""
