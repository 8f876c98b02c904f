"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ResourceError`` -> 3, everything
else that escapes a subcommand -> 1.
"""


class MlcircError(Exception):
    pass


class DomainError(MlcircError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedContextError(MlcircError):
    """Operation not available for the given field context."""


class ResourceError(MlcircError):
    """Input exceeds a size guard (exhaustive enumeration, expansion, ...)."""


class CircuitError(MlcircError):
    """Structurally invalid circuit; ``errors`` holds (gate_id, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        msg = "; ".join(f"gate {gid}: {m}" if gid is not None else m for gid, m in self.errors)
        super().__init__(msg or "invalid circuit")


class PreconditionError(MlcircError):
    pass


class InvariantError(MlcircError):
    """A checked postcondition failed. Always a bug, never silenced."""
