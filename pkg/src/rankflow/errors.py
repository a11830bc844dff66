"""Exception types shared across the package."""


class RankflowError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(RankflowError, ValueError):
    """A parameter combination is invalid (e.g. k > L, T < 1)."""


class InputDataError(RankflowError, ValueError):
    """Input data is malformed (NaN distances, ragged files, bad ids...)."""


class StageError(RankflowError, RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, original):
        super().__init__(f"stage '{stage}' failed: {original}")
        self.stage = stage
        self.original = original
