"""Exception types shared across the package."""


class UreidError(Exception):
    """Base class for package errors."""


class ZeroVectorError(UreidError, ValueError):
    """A vector with (near-)zero norm reached an operation that needs a direction."""


class DimMismatchError(UreidError, ValueError):
    """Operands disagree on dimensionality."""


class ParseError(UreidError, ValueError):
    """A data file is malformed; the message names the offending row."""


class InvalidConfigError(UreidError, ValueError):
    """A configuration value is missing or out of range; the message names the field."""


class EmptyClusterError(UreidError, ValueError):
    """A cluster operation received zero members."""


class NoClustersError(UreidError, ValueError):
    """A metric over clusters was requested but the labeling has none."""


class EmptyGalleryError(UreidError, ValueError):
    """Retrieval evaluation needs at least one gallery instance."""
