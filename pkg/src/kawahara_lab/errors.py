# src/kawahara_lab/errors.py
from __future__ import annotations


class KawaharaLabError(Exception):
    """Base class for every error raised by the lab."""


class InvalidParameters(KawaharaLabError, ValueError):
    """A physical or numerical parameter violates its documented range."""


class InvalidInput(KawaharaLabError, ValueError):
    """An array, file or lattice does not have the expected shape or content."""


class SchemaError(InvalidInput):
    """A CSV header does not match the schema a consumer declares."""

    def __init__(self, path: str, expected: list[str], found: list[str]):
        self.expected = list(expected)
        self.found = list(found)
        super().__init__(
            f"{path}: expected header {' or '.join(self.expected)}, got {','.join(self.found) or '(empty)'}"
        )


class ResolutionError(KawaharaLabError, RuntimeError):
    """A quantity changed by more than its tolerance when the grid was refined."""


class BlowupDetected(KawaharaLabError, RuntimeError):
    """Non-finite values appeared in a solver state."""

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"non-finite state at t={self.time:.6e}")


__all__ = [
    "KawaharaLabError",
    "InvalidParameters",
    "InvalidInput",
    "SchemaError",
    "ResolutionError",
    "BlowupDetected",
]
