"""Exception hierarchy shared across the package."""


class DyadintError(Exception):
    """Base class for all errors raised by dyadint."""


class ParseError(DyadintError):
    """Malformed expression / box literal / region file."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class DimensionError(DyadintError):
    """A variable index exceeds the declared dimension."""


class DomainError(DyadintError):
    """Evaluation left the mathematical domain (division by zero,
    sqrt of a negative range, overflow to infinity).

    ``node`` identifies the offending expression node when known, and
    ``cube`` the dyadic cube being evaluated when the error surfaced
    inside an integration sweep.
    """

    def __init__(self, message, node=None, cube=None):
        parts = [message]
        if node is not None:
            parts.append(f"in node {node!r}")
        if cube is not None:
            parts.append(f"over cube {cube!r}")
        super().__init__(" ".join(parts))
        self.node = node
        self.cube = cube

    def with_cube(self, cube):
        return DomainError(self.args[0].split(" in node")[0], node=self.node, cube=cube)


class PreconditionError(DyadintError):
    """A documented precondition of an operation was violated."""


class CapError(DyadintError):
    """A refinement level or coordinate magnitude exceeded the practical cap."""


class SoundnessError(DyadintError):
    """An internal bracket invariant failed; indicates an implementation bug."""
