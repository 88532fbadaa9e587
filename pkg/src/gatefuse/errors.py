"""Exception types shared across the package."""


class GatefuseError(Exception):
    """Domain error: bad data, incompatible shapes, or a failed fit."""


class LoadError(GatefuseError):
    """A data file exists but could not be parsed."""
