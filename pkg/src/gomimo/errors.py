"""Typed exceptions shared across the package."""


class GomimoError(Exception):
    """Base class for all package errors."""


class ConfigError(GomimoError):
    """Bad run configuration: unknown key, missing file, unparsable value."""


class RankDeficientChannelError(GomimoError):
    """Channel matrix too ill-conditioned to equalize."""


class TrainingDivergedError(GomimoError):
    """Non-finite loss encountered during training."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class UnbracketedTargetError(GomimoError):
    """Requested BER threshold is not bracketed by the measured curve."""
