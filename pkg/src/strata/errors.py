"""Exception hierarchy shared by every store."""

from __future__ import annotations


class StrataError(Exception):
    """Base class for all domain errors raised by the engine."""


class ParameterError(StrataError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ValidationError(StrataError, ValueError):
    pass


class NotFoundError(StrataError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class CycleError(StrataError):
    """Adding a supersession link would create a cycle."""


class StateError(StrataError):
    """Operation not allowed in the target's current lifecycle state."""


class HookError(StrataError):
    """A consumer-provided hook raised; the engine state is unchanged."""


class ContractViolation(StrataError):
    """A hook returned output that breaks its interface contract."""


class LogFormatError(StrataError):
    """The event log or a snapshot is corrupt or uses an unknown format."""


class LockError(StrataError):
    """Another writer holds the substrate lock."""
