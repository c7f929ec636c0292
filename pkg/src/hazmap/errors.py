"""Exception types and the process exit codes they map to."""


class HazmapError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3


class StructuralError(HazmapError):
    """Malformed input: bad array shapes, broken meshes, index errors."""

    exit_code = 2


class DomainError(HazmapError):
    """Input outside an operation's mathematical domain (e.g. interior gravity query)."""

    exit_code = 3


class DegenerateFrameError(DomainError):
    """Local frame construction failed, e.g. a vanishing gravity vector."""


class UndefinedMetaError(DomainError):
    """Image metadata is undefined because no pixel ray hit terrain."""


class IoError(HazmapError):
    """File read/write failure at the toolkit boundary."""

    exit_code = 4
