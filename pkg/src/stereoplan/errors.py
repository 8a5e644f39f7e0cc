class StereoPlanError(Exception):
    """Root of every error raised by the package."""


class NoPath(StereoPlanError):
    """Start and goal are not connected."""
