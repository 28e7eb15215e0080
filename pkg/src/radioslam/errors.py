"""Exception hierarchy shared by all modules."""


class SlamError(Exception):
    """Base class for every error raised by radioslam."""

    reason = "error"


class InvalidArgument(SlamError, ValueError):
    reason = "invalid-argument"


class InvalidConfig(SlamError, ValueError):
    reason = "invalid-config"


class DegenerateGeometry(SlamError):
    reason = "degenerate-geometry"


class SingularPath(SlamError):
    reason = "singular-path"


class InsufficientPaths(SlamError):
    reason = "insufficient-paths"


class DegenerateConfiguration(SlamError):
    reason = "degenerate-configuration"


class OrientationUnrecoverable(SlamError):
    reason = "orientation-unrecoverable"


class RankDeficiency(SlamError):
    reason = "rank-deficiency"


class EmptyResult(SlamError):
    reason = "empty-result"
