"""Exception hierarchy. Every error carries the pipeline stage it came from."""

from typing import Optional


class DrumAccompanimentError(Exception):
    """Base error; rendered as ``[stage] message``."""

    default_stage = "drum-accompaniment"

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage or self.default_stage

    def __str__(self) -> str:
        return f"[{self.stage}] {self.message}"


class ConfigError(DrumAccompanimentError):
    default_stage = "config"

    def __init__(self, message: str, field_path: Optional[str] = None, stage: Optional[str] = None):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message, stage)


class AudioError(DrumAccompanimentError):
    default_stage = "audio"


class CheckpointError(DrumAccompanimentError):
    default_stage = "checkpoint"


class TrainingError(DrumAccompanimentError):
    default_stage = "train"


class FeatureFileError(DrumAccompanimentError):
    default_stage = "features"


class PipelineError(DrumAccompanimentError):
    default_stage = "pipeline"
