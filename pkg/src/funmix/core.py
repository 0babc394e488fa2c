"""Dense-matrix validation, model dimensions, and mixing-model diagnostics.

The solvers treat a hyperspectral scene as a ``p x n`` matrix ``Y`` (one
pixel per column), a spectral library as a ``p x m`` matrix ``D`` (one
candidate spectrum per column), and factor the scene as ``Y ~ D @ B @ A``
with mixing weights ``B`` (m x r, one column per scene endmember) and
abundances ``A`` (r x n).  Everything downstream shares the validation
helpers here: 64-bit floats, column-major layout so pixel columns are
contiguous, finite entries, and loud dimension errors instead of silent
broadcasting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "NotOvercompleteWarning",
    "ModelDims",
    "ConstraintReport",
    "as_matrix",
    "as_vector",
    "objective_value",
    "constraint_violations",
]


class DimensionMismatchError(ValueError):
    """Two matrices that must conform do not; the message names both shapes."""


class NotOvercompleteWarning(UserWarning):
    """The spectral library has no more atoms than bands.

    Library-based unmixing expects an overcomplete dictionary (more atoms
    than bands).  Small or synthetic instances routinely violate this, so it
    is reported as a warning rather than rejected.
    """


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and coerce ``a`` to a 2-D float64 column-major array.

    Rejects empty dimensions and non-finite entries so that every matrix
    entering the solvers is well formed.  Returns a Fortran-ordered array
    (pixel columns contiguous); no copy is made when the input already
    complies.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must have at least one row and one column, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries (NaN or Inf)")
    return np.asfortranarray(arr)


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Validate and coerce ``a`` to a 1-D finite float64 array."""
    arr = np.asarray(a, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries (NaN or Inf)")
    return arr


def _require_match(left_name: str, left: int, right_name: str, right: int) -> None:
    if left != right:
        raise DimensionMismatchError(
            f"{left_name} = {left} must equal {right_name} = {right}"
        )


@dataclass(frozen=True)
class ModelDims:
    """Problem dimensions: p bands, n pixels, m library atoms, r endmembers."""

    p: int
    n: int
    m: int
    r: int

    def __post_init__(self):
        for field_name in ("p", "n", "m"):
            value = getattr(self, field_name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{field_name} must be a positive integer, got {value!r}")
        if not isinstance(self.r, (int, np.integer)) or not 1 <= self.r <= self.m:
            raise ValueError(f"r must satisfy 1 <= r <= m = {self.m}, got {self.r!r}")
        if self.m <= self.p:
            warnings.warn(
                f"library has m = {self.m} atoms for p = {self.p} bands; "
                "library-based unmixing expects an overcomplete library (m > p)",
                NotOvercompleteWarning,
                stacklevel=2,
            )


class ConstraintReport(NamedTuple):
    """Worst-case abundance constraint violations for a candidate ``A``."""

    asc_max: float  # max over columns of |column sum - 1|
    anc_min: float  # minimum entry; negative quantifies nonnegativity violation


def objective_value(Y, D, B, A) -> float:
    """Half squared Frobenius residual of the low-rank mixing model.

    Computes ``0.5 * ||Y - D @ B @ A||_F**2`` after checking that the four
    factors conform (Y: p x n, D: p x m, B: m x r, A: r x n).
    """
    Y = as_matrix(Y, "Y")
    D = as_matrix(D, "D")
    B = as_matrix(B, "B")
    A = as_matrix(A, "A")
    _require_match("Y rows (bands)", Y.shape[0], "D rows", D.shape[0])
    _require_match("D cols (atoms)", D.shape[1], "B rows", B.shape[0])
    _require_match("B cols (endmembers)", B.shape[1], "A rows", A.shape[0])
    _require_match("Y cols (pixels)", Y.shape[1], "A cols", A.shape[1])
    resid = Y - (D @ B) @ A
    return float(0.5 * np.vdot(resid, resid).real)


def constraint_violations(A) -> ConstraintReport:
    """Report sum-to-one and nonnegativity violations of abundance columns.

    ``asc_max`` is the largest absolute deviation of any column sum from 1;
    ``anc_min`` is the smallest entry of ``A`` (a negative value quantifies
    how far the nonnegativity constraint is violated).
    """
    A = as_matrix(A, "A")
    col_sums = A.sum(axis=0)
    return ConstraintReport(
        asc_max=float(np.abs(col_sums - 1.0).max()),
        anc_min=float(A.min()),
    )
