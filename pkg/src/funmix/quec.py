"""Closed-form least squares under a column sum-to-one equality constraint.

Both solvers repeatedly minimize, over a matrix ``A`` whose columns must
each sum to one,

    0.5 * ||Y - E @ A||_F**2  +  (mu / 2) * ||S - A - L||_F**2

for fixed ``Y``, ``E``, split variable ``S`` and dual ``L``.  Writing the
first-order conditions with a multiplier for the equality constraint gives
a bordered linear system per column; eliminating the multiplier by
blockwise inversion yields a single closed form built from

    Q = (E^T E + mu * I)^{-1},      c = -1 / (1^T Q 1),

which is applied to the stacked right-hand side ``E^T Y + mu (S - L)`` for
all columns at once.  The augmented ``mu * I`` term keeps the normal matrix
positive definite for every ``mu > 0``, so the factorization never fails on
well-scaled data.

:func:`quec_solve` is the production path.  :func:`kkt_oracle_solve` solves
the same first-order conditions column by column with a generic dense LU
factorization of the bordered system; it exists purely so tests can
cross-check the closed form against an independent route.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import DimensionMismatchError, as_matrix

__all__ = [
    "FactorizationError",
    "QuecFactors",
    "quec_factorize",
    "quec_solve",
    "kkt_oracle_solve",
]

# Above this size the inverse is not materialized; the factors are applied
# through triangular solves instead.  Behavior is identical either way.
_MATERIALIZE_LIMIT = 512


class FactorizationError(ArithmeticError):
    """The augmented normal matrix could not be factorized."""


@dataclass(frozen=True)
class QuecFactors:
    """Reusable factors of the augmented normal matrix ``E^T E + mu I``.

    ``Q`` is the explicit inverse (``None`` when the constrained dimension
    exceeds the materialization limit, in which case the Cholesky factor is
    applied instead), ``q1 = Q @ 1`` and ``c = -1 / (1^T Q 1)``.  Immutable
    and safe to share across threads.
    """

    k: int  # constrained dimension (rows of the solution)
    mu: float
    Q: np.ndarray | None
    q1: np.ndarray
    c: float
    chol: tuple = field(repr=False)  # scipy (cho, lower) pair


def quec_factorize(E, mu: float) -> QuecFactors:
    """Factorize ``E^T E + mu I`` and cache the sum-to-one correction terms.

    ``E`` is p x k; the factors solve constrained problems whose unknowns
    have k rows.  Factors are immutable, so they can be computed once and
    reused for every right-hand side sharing the same ``E`` and ``mu``.

    Raises
    ------
    ValueError
        If ``mu <= 0`` or ``E`` is malformed.
    FactorizationError
        If the factorization fails (pathological conditioning); the message
        reports a condition estimate.
    """
    E = as_matrix(E, "E")
    mu = float(mu)
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    k = E.shape[1]
    G = E.T @ E
    G[np.diag_indices(k)] += mu
    if not np.isfinite(G).all():
        raise FactorizationError(
            "augmented normal matrix has non-finite entries (input scale overflows)"
        )
    try:
        chol = cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"augmented normal matrix is not positive definite "
            f"(condition estimate {np.linalg.cond(G):.3e})"
        ) from exc
    if k <= _MATERIALIZE_LIMIT:
        Q = cho_solve(chol, np.eye(k))
        Q = 0.5 * (Q + Q.T)  # exact symmetry; triangular solves leave eps-level skew
        q1 = Q.sum(axis=1)
    else:
        Q = None
        q1 = cho_solve(chol, np.ones(k))
    s = float(q1.sum())
    if not np.isfinite(s) or s <= 0.0:
        raise FactorizationError(
            f"sum-to-one correction degenerate (1^T Q 1 = {s!r}); "
            f"condition estimate {np.linalg.cond(G):.3e}"
        )
    return QuecFactors(k=k, mu=mu, Q=Q, q1=q1, c=-1.0 / s, chol=chol)


def quec_solve(factors: QuecFactors, rhs) -> np.ndarray:
    """Apply the factors to ``rhs = E^T Y + mu (S - L)`` (caller assembles).

    Returns the k x n minimizer; every column sums to one up to roundoff,
    because the rank-one correction cancels the column-sum gap of the
    unconstrained ridge solve exactly:

        A = Q @ rhs - (q1 / (1^T q1)) * (colsum(Q @ rhs) - 1)
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.ndim != 2 or rhs.shape[0] != factors.k:
        raise DimensionMismatchError(
            f"rhs must have {factors.k} rows to match the factors, got shape {rhs.shape}"
        )
    if factors.Q is not None:
        base = factors.Q @ rhs
    else:
        # non-finite rhs flows through as NaN/Inf, mirroring the dense path
        base = cho_solve(factors.chol, rhs, check_finite=False)
    col_gap = base.sum(axis=0) - 1.0
    return base + (factors.c * factors.q1)[:, None] * col_gap[None, :]


def kkt_oracle_solve(Y, E, S, L, mu: float, return_multipliers: bool = False):
    """Verification oracle: per-pixel dense solve of the bordered system.

    For each pixel column assembles the (k+1) x (k+1) system

        [ E^T E + mu I   1 ] [ a  ]   [ E^T y + mu (s - l) ]
        [     1^T        0 ] [ nu ] = [          1         ]

    and solves it with a generic LU factorization.  This is the slow,
    independent route used to validate :func:`quec_solve`; it is not the
    production path.  A singular bordered system (impossible for mu > 0 on
    finite data) propagates ``numpy.linalg.LinAlgError``.

    Returns the stacked abundance columns, plus the per-pixel equality
    multipliers when ``return_multipliers`` is true.
    """
    Y = as_matrix(Y, "Y")
    E = as_matrix(E, "E")
    S = as_matrix(S, "S")
    L = as_matrix(L, "L")
    mu = float(mu)
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    p, k = E.shape
    n = Y.shape[1]
    if Y.shape[0] != p:
        raise DimensionMismatchError(f"Y rows = {Y.shape[0]} must equal E rows = {p}")
    if S.shape != (k, n) or L.shape != (k, n):
        raise DimensionMismatchError(
            f"S and L must be {k} x {n}, got {S.shape} and {L.shape}"
        )

    bordered = np.zeros((k + 1, k + 1))
    bordered[:k, :k] = E.T @ E + mu * np.eye(k)
    bordered[:k, k] = 1.0
    bordered[k, :k] = 1.0

    top = E.T @ Y + mu * (S - L)
    A = np.empty((k, n), order="F")
    nu = np.empty(n)
    rhs = np.empty(k + 1)
    for j in range(n):
        rhs[:k] = top[:, j]
        rhs[k] = 1.0
        sol = np.linalg.solve(bordered, rhs)
        A[:, j] = sol[:k]
        nu[j] = sol[k]
    if return_multipliers:
        return A, nu
    return A
