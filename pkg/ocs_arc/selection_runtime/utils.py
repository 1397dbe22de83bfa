# selection_runtime/utils.py
"""
Shared helpers for the selection runtime: the exception hierarchy,
the `_require` guard and deterministic seeding.

Every replicate gets its own seed (base_seed + replicate_index) and all
randomness inside a replicate is drawn from numpy PCG64 generators
spawned from that seed, so a run can be replayed bit for bit.
"""

from __future__ import annotations

import math
from typing import Any, List, Optional, Sequence

import numpy as np


# ---------------------------
# Errors
# ---------------------------
class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class DataParseError(InvalidInputError):
    def __init__(self, message: str, *, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(InvalidInputError):
    pass


class EmptyDatasetError(InvalidInputError):
    pass


class NonConvergenceError(RuntimeError):
    pass


class ModelFitError(RuntimeError):
    pass


class ConfigError(ValueError):
    """Config could not be loaded or failed validation; `diagnostics` lists every problem."""

    def __init__(self, message: str, diagnostics: Sequence[Any] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


def _require(cond: bool, msg: str, exc: type = InvalidInputError) -> None:
    if not cond:
        raise exc(msg)


# ---------------------------
# Numeric guards
# ---------------------------
def as_vector(x: Any, name: str = "x") -> np.ndarray:
    """Return x as a 1-d float array, rejecting NaN."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    _require(arr.ndim == 1, f"{name} must be a vector, got shape {arr.shape}")
    _require(not np.isnan(arr).any(), f"{name} contains NaN")
    return arr


def as_matrix(X: Any, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    _require(arr.ndim == 2, f"{name} must be a matrix, got shape {arr.shape}")
    _require(not np.isnan(arr).any(), f"{name} contains NaN")
    return arr


def is_finite_real(v: Any) -> bool:
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


# ---------------------------
# Deterministic randomness
# ---------------------------
def replicate_seed(base_seed: int, replicate_index: int) -> int:
    """Seed of one Monte Carlo replicate."""
    _require(replicate_index >= 0, "replicate_index must be >= 0")
    return int(base_seed) + int(replicate_index)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    """
    Independent sub-streams of one seed (data, split, tie randomizers, ...).
    The order of the returned generators is part of the replay contract.
    """
    children = np.random.SeedSequence(int(seed)).spawn(int(count))
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def join_indices(items: Sequence[int]) -> str:
    """Semicolon-joined index list used in trajectory CSVs."""
    return ";".join(str(int(i)) for i in items)
