"""Exception types shared across moglab modules."""


class NumericError(RuntimeError):
    """A computation produced non-finite values."""


class TrainingDivergedError(NumericError):
    """Training loss became non-finite; carries the offending step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


class CheckpointFormatError(ValueError):
    """A checkpoint file is corrupt, truncated, or has the wrong magic/version."""


class DegenerateMappingError(ValueError):
    """Hierarchical-guidance order mapping is undefined (w3 or mapped w3 in {0, 1})."""
