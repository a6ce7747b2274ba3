"""Exception types shared across the package."""


class InputDomainError(ValueError):
    """An argument lies outside the operation's domain."""


class ValidationError(ValueError):
    """A data object or file violates a documented invariant."""


class ManifestParseError(ValidationError):
    """A manifest or scene file could not be parsed."""


class CheckpointError(ValueError):
    """A checkpoint is unreadable or from an incompatible format version."""


class TrainingDiverged(RuntimeError):
    """The photometric loss blew up and stayed up."""


class EmptySceneError(RuntimeError):
    """No ray reached the opacity needed to place a surface point."""
