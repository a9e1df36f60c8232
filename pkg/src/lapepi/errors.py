"""Exception types shared across the toolkit.

Everything raised on bad data derives from :class:`LapEpiError`, so the
CLI can map domain failures to exit code 1 without catching programming
errors.
"""


class LapEpiError(ValueError):
    """Base class for domain errors (bad input data, bad files, bad shapes)."""


class ManifestError(LapEpiError):
    pass


class ShapeError(LapEpiError):
    pass


class ColorspaceError(LapEpiError):
    pass


class NoAliasingError(LapEpiError):
    """Raised when the replica band is empty and no pre-filter is defined."""


class CheckpointError(LapEpiError):
    pass


class TrainingDiverged(LapEpiError):
    """Non-finite loss during training; ``last_good`` holds the params before it."""

    def __init__(self, message, last_good=None, step=None):
        super().__init__(message)
        self.last_good = last_good
        self.step = step
