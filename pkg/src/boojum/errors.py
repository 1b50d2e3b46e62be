"""Exception types shared across the package."""

from __future__ import annotations


class BoojumError(Exception):
    """Base class for package errors."""


class SolverError(BoojumError):
    """A solver failed to converge; carries the last iterate diagnostics."""

    def __init__(self, message: str, residual_norm: float | None = None, iterate=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterate = iterate


class DegenerateFrameError(BoojumError):
    """The reduction frame is undefined (director parallel to the field axis)."""


class PoleError(BoojumError):
    """A tangent boundary field was queried at a pole where it is undefined."""


class ConstructionError(BoojumError):
    """A recovery construction violated one of its structural checks."""
