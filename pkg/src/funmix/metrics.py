"""Abundance evaluation (signal reconstruction error) and library tooling
(spectral angles, angle-threshold pruning)."""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

from .core import DimensionMismatchError, as_matrix, as_vector

__all__ = [
    "SreReport",
    "PruneResult",
    "ScaledAtomWarning",
    "sre",
    "spectral_angle",
    "prune_library",
]

# Atoms closer than this (degrees) count as collinear for the scaled-copy check.
_COLLINEAR_DEG = 0.1


class ScaledAtomWarning(UserWarning):
    """Pruning removed an atom nearly collinear with a kept one but with a
    clearly different norm; it may be a distinct material that only looks
    like a scaled copy."""


class SreReport(NamedTuple):
    """Signal reconstruction error in decibels, with the norms behind it."""

    sre_db: float
    frob_true: float
    frob_err: float


class PruneResult(NamedTuple):
    D_pruned: np.ndarray
    kept_indices: list[int]


def sre(A_true, A_hat) -> SreReport:
    """Signal reconstruction error ``20 log10(||A|| / ||A - A_hat||)`` in dB.

    Higher is better; a perfect estimate returns an explicit ``inf``
    sentinel (with ``frob_err = 0``) rather than raising, so sweep tables
    render cleanly.
    """
    A_true = as_matrix(A_true, "A_true")
    A_hat = as_matrix(A_hat, "A_hat")
    if A_true.shape != A_hat.shape:
        raise DimensionMismatchError(
            f"A_true shape {A_true.shape} must equal A_hat shape {A_hat.shape}"
        )
    frob_true = float(np.linalg.norm(A_true))
    if frob_true == 0.0:
        raise ValueError("A_true is identically zero; SRE is undefined")
    frob_err = float(np.linalg.norm(A_true - A_hat))
    if frob_err == 0.0:
        return SreReport(math.inf, frob_true, 0.0)
    return SreReport(20.0 * math.log10(frob_true / frob_err), frob_true, frob_err)


def spectral_angle(x, y) -> float:
    """Angle between two spectra in degrees, in [0, 180].

    Scale-invariant in each argument (positive scaling); zero iff the
    vectors are positive multiples of each other.
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise DimensionMismatchError(f"x has {x.size} entries but y has {y.size}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("spectral angle undefined for a zero vector")
    cos = np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)))


def prune_library(D, min_angle_deg: float) -> PruneResult:
    """Greedily drop atoms closer than ``min_angle_deg`` to an earlier keeper.

    One pass in ascending index order: atom j is kept iff its angle to every
    already-kept atom is at least the threshold, so all pairwise angles in
    the pruned library meet the floor.  The order is deterministic and
    favors low indices.

    Dropping a near-collinear atom whose norm differs by at least 1% from
    its blocker emits :class:`ScaledAtomWarning`: scaled spectra can be
    distinct materials, and this pruning cannot tell them apart.
    """
    D = as_matrix(D, "D")
    if min_angle_deg < 0.0:
        raise ValueError(f"min_angle_deg must be >= 0, got {min_angle_deg}")
    m = D.shape[1]
    norms = np.linalg.norm(D, axis=0)
    if (norms == 0.0).any():
        raise ValueError("library contains a zero atom; spectral angles undefined")
    units = D / norms[None, :]
    kept: list[int] = []
    for j in range(m):
        blocker = None
        min_seen = np.inf
        if kept:
            cos = np.clip(units[:, kept].T @ units[:, j], -1.0, 1.0)
            angles = np.degrees(np.arccos(cos))
            worst = int(np.argmin(angles))
            min_seen = float(angles[worst])
            if min_seen < min_angle_deg:
                blocker = kept[worst]
        if blocker is None:
            kept.append(j)
            continue
        if min_seen < _COLLINEAR_DEG:
            scale_gap = abs(norms[j] - norms[blocker]) / max(norms[j], norms[blocker])
            if scale_gap >= 0.01:
                warnings.warn(
                    f"atom {j} removed as collinear with kept atom {blocker} "
                    f"(angle {min_seen:.3f} deg) but their norms differ by "
                    f"{100 * scale_gap:.1f}%; it may be a distinct scaled material",
                    ScaledAtomWarning,
                    stacklevel=2,
                )
    return PruneResult(np.asfortranarray(D[:, kept]), kept)
