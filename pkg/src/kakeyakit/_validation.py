"""Input validation helpers shared by the public functions and estimators."""
from __future__ import annotations

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError(f"expected a 1-d coordinate vector, got shape {p.shape}")
    return p


def check_points(X, d: int | None = None, allow_empty: bool = False) -> np.ndarray:
    """Return ``X`` as a finite float array of shape (n, d)."""
    P = np.asarray(X, dtype=float)
    if P.ndim == 1 and P.size and d in (None, 1):
        P = P[:, None]
    if P.ndim != 2:
        raise InvalidInputError(f"expected a 2-d point array, got shape {P.shape}")
    if not allow_empty and P.shape[0] == 0:
        raise InvalidInputError("point set is empty")
    if d is not None and P.shape[0] and P.shape[1] != d:
        raise InvalidInputError(f"expected points in dimension {d}, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        raise InvalidInputError("point coordinates must be finite")
    return P


def check_positive(value, name: str) -> float:
    v = float(value)
    if not (v > 0 and np.isfinite(v)):
        raise InvalidInputError(f"{name} must be positive, got {value!r}")
    return v


def check_dimension(d: int, lo: int = 1, hi: int = 4) -> int:
    if int(d) != d or not lo <= d <= hi:
        raise InvalidInputError(f"dimension must be an integer in [{lo}, {hi}], got {d!r}")
    return int(d)
