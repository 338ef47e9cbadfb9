"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class SolverError(RuntimeError):
    """Field solve failed to reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class EscapedParticleError(RuntimeError):
    """One or more particles left the grid support.

    ``indices`` holds the offending particle indices (into the array that
    was passed to the failing operation).
    """

    def __init__(self, indices: np.ndarray):
        self.indices = np.atleast_1d(np.asarray(indices))
        n = self.indices.size
        first = self.indices[:8].tolist()
        super().__init__(
            f"{n} particle(s) outside grid support, first indices {first}"
        )
