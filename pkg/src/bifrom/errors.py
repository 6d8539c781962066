"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class BifromError(Exception):
    exit_code = 1


class ConfigError(BifromError, ValueError):
    exit_code = 2


class NonFiniteError(BifromError, FloatingPointError):
    """State left the finite range during a pseudo-time march (dt too large)."""

    exit_code = 3


class NoConvergenceError(BifromError, RuntimeError):
    exit_code = 3


class SingularJacobianError(NoConvergenceError):
    pass


class MissingArtifactError(BifromError, LookupError):
    exit_code = 4


class ZeroSnapshotsError(BifromError, ValueError):
    exit_code = 3


class InvalidKError(ConfigError):
    pass


class DimensionMismatchError(BifromError, ValueError):
    exit_code = 2


class NoPerfectMatchError(BifromError, RuntimeError):
    exit_code = 3


class BadMagicError(BifromError, ValueError):
    exit_code = 4


class TruncatedFileError(BifromError, ValueError):
    exit_code = 4
