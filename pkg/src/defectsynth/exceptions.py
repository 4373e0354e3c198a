class InvalidInputError(Exception):
    """Raise this error if invalid input is passed."""


class ShapeMismatchError(Exception):
    """Raise this error if a tensor shape does not match what a layer or loss expects."""


class DimensionMismatchError(Exception):
    """Raise this error if image or mask dimensions do not agree."""


class NonBinaryMaskError(Exception):
    """Raise this error if a mask contains values other than 0 and 1."""


class GenerationFailedError(Exception):
    """Raise this error if label generation keeps producing empty masks."""


class InsufficientDataError(Exception):
    """Raise this error if there are fewer samples than a stage needs."""


class TrainingDivergenceError(Exception):
    """Raise this error if a loss or gradient becomes non finite during training."""

    def __init__(self, msg: str, step: int | None = None):
        super().__init__(msg)
        self.step = step


class MissingModelError(Exception):
    """Raise this error if a synthetic dataset variant is requested without its models."""


class ManifestResolutionError(Exception):
    """Raise this error if manifest entries can not be resolved to files."""


class CheckpointFormatError(Exception):
    """Raise this error if a checkpoint file is malformed."""


class StageFailedError(Exception):
    """Raise this error if an experiment stage fails."""

    def __init__(self, msg: str, stage: str, seed: int):
        super().__init__(msg)
        self.stage = stage
        self.seed = seed
