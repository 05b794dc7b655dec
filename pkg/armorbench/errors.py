"""
Error types for ArmorBench.
Every failure the pipeline reports on purpose derives from ArmorBenchError.
"""


class ArmorBenchError(Exception):
    """Base class for all ArmorBench errors."""


class ConfigError(ArmorBenchError):
    """Invalid configuration value, unknown key or missing required key."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DataFormatError(ArmorBenchError):
    """Raw input does not follow the expected binary layout."""


class CorruptRecordError(DataFormatError):
    """A single record inside an otherwise well-formed buffer is invalid."""

    def __init__(self, message, record_index):
        self.record_index = record_index
        super().__init__(f"record {record_index}: {message}")


class AnnotationParseError(ArmorBenchError):
    """Malformed annotation CSV."""

    def __init__(self, message, line_number):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ShapeError(ArmorBenchError, ValueError):
    """Array shapes or dimensions do not match."""


class InvalidInputError(ArmorBenchError, ValueError):
    """Empty or otherwise unusable input."""


class LabelIndexError(ArmorBenchError, IndexError):
    """Class label outside [0, K)."""


class TrainingDivergenceError(ArmorBenchError):
    """Loss or parameters became non-finite during training."""

    def __init__(self, message, epoch):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class AttackFailureError(ArmorBenchError):
    """An attack could not produce a valid example for a sample."""

    def __init__(self, message, sample_id):
        self.sample_id = sample_id
        super().__init__(f"sample {sample_id}: {message}")


class DegenerateGeometryError(AttackFailureError):
    """DeepFool found two logits with (numerically) identical input gradients."""


class CheckpointError(ArmorBenchError):
    """Base class for container file load errors."""


class BadMagicError(CheckpointError):
    """File does not start with the expected magic tag."""


class VersionMismatchError(CheckpointError):
    """File was written with an unsupported format version."""


class TruncatedBlobError(CheckpointError):
    """File ends before the declared metadata or parameter blob."""


class DependencyError(ArmorBenchError):
    """A pipeline step needs an artifact that an earlier step has not produced."""

    def __init__(self, missing_path, step=None):
        self.missing_path = str(missing_path)
        hint = f" (run '{step}' first)" if step else ""
        super().__init__(f"missing required file {self.missing_path}{hint}")
