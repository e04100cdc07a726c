"""Exception hierarchy shared across the engine."""


class ClariPickError(Exception):
    """Base class for all engine errors."""


class ShapeError(ClariPickError):
    """Tensor shapes incompatible with the requested operation."""


class NonFiniteError(ClariPickError):
    """A NaN or Inf value surfaced where only finite values are allowed."""


class GraphError(ClariPickError):
    """Misuse of the differentiation record (unrecorded node, non-scalar loss, mixed tapes)."""


class SceneParseError(ClariPickError):
    """Scene file does not conform to the canonical schema."""

    def __init__(self, message, field_path=None):
        super().__init__(message if field_path is None else f"{message} (at {field_path})")
        self.field_path = field_path


class SceneValidationError(ClariPickError):
    """Scene contents violate a structural invariant."""


class ConfigError(ClariPickError):
    """Invalid or infeasible configuration."""


class ProtocolError(ClariPickError):
    """Dialogue state machine used out of phase."""


class EmptyInstructionError(ClariPickError):
    """An utterance produced no tokens."""


class CheckpointError(ClariPickError):
    """Checkpoint archive is missing, corrupt, or from an incompatible version."""


class ImportDataError(ClariPickError):
    """External dataset root could not be converted."""


class EvaluationError(ClariPickError):
    """Metric computation is undefined for the given inputs."""
