"""Exception hierarchy shared by every module of the engine."""

from __future__ import annotations


class LftsError(Exception):
    """Base class for all engine errors."""


class SchemaError(LftsError):
    """A state or update does not conform to its schema."""


class ArityError(LftsError):
    """A two-state predicate was evaluated against a single state."""


class DomainError(LftsError, ValueError):
    """A value lies outside its declared finite domain."""


class ExplosionError(LftsError):
    """An exhaustive check would enumerate more states than the cap allows."""

    def __init__(self, size: int, cap: int) -> None:
        super().__init__(f"state space of {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class PreconditionError(LftsError):
    """An operation was invoked outside its precondition.

    The explorer treats these as "step not enabled" and prunes them.
    """


class AlreadyAssignedError(PreconditionError):
    pass


class UnassignedError(PreconditionError):
    pass


class NoNextBlockError(PreconditionError):
    pass


class NotLastBlockError(PreconditionError):
    pass


class NotOnBlockError(PreconditionError):
    pass


class AlreadyEnteredError(PreconditionError):
    pass


class ScheduleMismatchError(LftsError):
    """A scripted fault targets an assignment absent from the update."""


class ScopeViolationError(LftsError):
    """The error injector produced an assignment outside its scope."""


class ReplayMismatchError(LftsError):
    def __init__(self, step: int, message: str) -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step


class ConfigError(LftsError):
    """Scenario, topology or injection input is malformed or inconsistent."""
