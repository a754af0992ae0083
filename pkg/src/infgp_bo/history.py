"""Observation history: evaluated inputs, observed rewards, and the design box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfBounds


@dataclass
class ObservationHistory:
    bounds: np.ndarray  # (d, 2) rows of (low, high)
    X: np.ndarray = None
    y: np.ndarray = None

    def __post_init__(self):
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if self.bounds.shape[1] != 2 or np.any(self.bounds[:, 1] <= self.bounds[:, 0]):
            raise ValueError(f"bounds must be (d, 2) with low < high, got {self.bounds}")
        d = self.bounds.shape[0]
        self.X = np.zeros((0, d)) if self.X is None else np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.zeros(0) if self.y is None else np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch("X and y disagree on the number of observations")
        if self.X.shape[0] and self.X.shape[1] != d:
            raise DimensionMismatch("X columns must match the bounds dimension")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.bounds.shape[0]

    def __len__(self):
        return self.n

    def append(self, x, y_val: float) -> None:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if x.shape[1] != self.d:
            raise DimensionMismatch(f"expected a {self.d}-vector, got {x.shape[1]}")
        if np.any(x < self.bounds[:, 0] - 1e-12) or np.any(x > self.bounds[:, 1] + 1e-12):
            raise OutOfBounds(f"{x.ravel()} lies outside the design box")
        self.X = np.vstack([self.X, x])
        self.y = np.append(self.y, float(y_val))

    def copy(self) -> "ObservationHistory":
        return ObservationHistory(self.bounds.copy(), self.X.copy(), self.y.copy())
