"""Time-ordered regression data container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (length T) and design ``X`` (T x p); row order is time order."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise ValueError("y must be a vector and X a matrix")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"dimension mismatch: y has {y.shape[0]} rows, X has {X.shape[0]}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def rows(self, index) -> Dataset:
        return Dataset(self.y[index], self.X[index])
