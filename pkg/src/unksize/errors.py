"""Exception hierarchy."""

from __future__ import annotations


class UnksizeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UnksizeError, ValueError):
    """An argument lies outside the domain of a density or parameter space."""


class ValidationError(UnksizeError, ValueError):
    """Input data or a model specification failed validation."""


class DegenerateComponentError(UnksizeError, ArithmeticError):
    """A mixture component lost all support and must be pruned.

    ``components`` lists the offending component indices.
    """

    def __init__(self, message: str, components: list[int]):
        super().__init__(message)
        self.components = components


class OptimizationError(UnksizeError, RuntimeError):
    """An optimizer could not make progress. ``trace`` carries what it saw."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class InferenceUnreliableError(UnksizeError, RuntimeError):
    """Too many bootstrap replicates failed; ``partial`` holds the survivors."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
