"""Exception hierarchy for the avatarkit library."""


class AvatarKitError(Exception):
    """Base class for all library errors."""


class MeshFormatError(AvatarKitError):
    """Raised when a mesh file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TopologyError(AvatarKitError):
    """Unsupported or inconsistent mesh topology (quads, non-manifold edges...)."""


class DegenerateNormalError(AvatarKitError):
    """A vertex has no well-defined normal (zero-area umbrella)."""


class AsymmetryError(AvatarKitError):
    """Mesh is not bilaterally symmetric within tolerance."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending) if offending is not None else []


class ConnectivityError(AvatarKitError):
    """Isolated vertex or disconnected structure where connectivity is required."""


class RankDeficiencyError(AvatarKitError):
    """Linear system is singular (e.g. no constraint carries weight)."""


class SolverError(AvatarKitError):
    """Sparse solve did not reach the required residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AnnotationError(AvatarKitError):
    """Missing or inconsistent 2D annotations."""


class ParameterError(AvatarKitError):
    """Invalid operation parameter (e.g. k larger than the eligible vertex count)."""


class OutOfFrameError(AvatarKitError):
    """A query pixel lies outside the image."""


class NormalizationError(AvatarKitError):
    """Input vector is not unit length within tolerance."""


class ConditioningError(AvatarKitError):
    """Normal equations are rank deficient; a ridge term is recommended."""


class OptimizerError(AvatarKitError):
    """Iterative optimization diverged."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class AlignmentError(AvatarKitError):
    """Grids/masks that must share a size do not."""


class AtlasError(AvatarKitError):
    """Mesh lacks the UV atlas required by a texture operation."""


class EmptyVisibilityError(AvatarKitError):
    """No visible texel/vertex where at least one is required."""


class EmptySelectionError(AvatarKitError):
    """A filter removed every element."""


class ConfigError(AvatarKitError):
    """Invalid pipeline configuration."""


class StageError(AvatarKitError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
