"""Exception types shared across the package."""


class EegvaeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EegvaeError):
    """A configuration value violates its invariant; names the field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class ParameterError(EegvaeError):
    """A filter-design or operation parameter is out of range."""


class RankError(EegvaeError):
    """A decomposition cannot deliver the requested number of components."""

    def __init__(self, message: str, achievable: int | None = None):
        self.achievable = achievable
        super().__init__(message)


class SequenceLengthError(EegvaeError):
    """An input sequence length does not match the model's configured length."""


class FeasibilityError(EegvaeError):
    """A label sequence cannot be aligned to the given number of frames."""


class CheckpointError(EegvaeError):
    """A checkpoint file is corrupt, truncated, or of the wrong kind/version."""


class StageError(EegvaeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
