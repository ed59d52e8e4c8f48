"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error the engine raises deliberately."""


class DocumentError(EngineError):
    """A document (environment, codebook, scenario, observations) failed to
    parse or validate. ``location`` names the offending element."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(message if location is None else f"{location}: {message}")


class UnknownIdError(EngineError):
    """A referenced entity, cause, symptom, or attribute does not exist."""


class DuplicateIdError(EngineError):
    """An insert collided with an existing id."""


class CycleError(EngineError):
    """A dependency edge would close a cycle in a graph required to be acyclic."""
