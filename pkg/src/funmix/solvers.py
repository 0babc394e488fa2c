"""ADMM solvers for library-based unmixing under the low-rank mixing model.

Three solvers share one machinery:

* :func:`fclsu_admm` -- supervised abundance estimation with known
  endmember spectra ``E``: minimize ``0.5 ||Y - E A||_F^2`` subject to
  nonnegative columns of ``A`` summing to one.
* :func:`fasun` -- semi-supervised unmixing with a convexity constraint on
  the mixing weights: minimize ``0.5 ||Y - D B A||_F^2`` with simplex
  columns for both ``A`` and ``B``, so scene endmembers ``E = D B`` are
  convex combinations of library atoms.
* :func:`suns` -- same data term with an l1 sparsity penalty and a [0, 1]
  box on ``B`` instead of the sum-to-one constraint.

The joint problem is nonconvex; it is attacked by cyclic descent between
two convex blocks.  The A-step holds ``B`` (hence ``E = D B``) fixed and
runs an ADMM whose equality-constrained subproblem has the closed form in
:mod:`funmix.quec`, with a splitting variable ``S`` absorbing the
nonnegativity constraint and a dual ``L``.  The B-step holds ``A`` fixed
and splits twice (``S1`` for the constraint on ``B`` itself, ``S2`` for the
product ``D B``), with duals ``L1``, ``L2``.  All splits and duals are
zero-initialized once and warm-started across outer iterations.

Everything is plain float64 numpy; given identical inputs the solvers are
bit-for-bit deterministic (reductions are delegated to the BLAS in a fixed
order, and no randomness is used).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import DimensionMismatchError, ModelDims, as_matrix
from .quec import QuecFactors, quec_factorize, quec_solve

__all__ = [
    "AdmmParams",
    "SolverState",
    "Residuals",
    "Diagnostics",
    "UnmixResult",
    "NonFiniteIterateError",
    "soft_threshold",
    "fclsu_admm",
    "fasun",
    "suns",
    "a_step",
    "b_step_fasun",
    "b_step_suns",
]

# Early stopping fires only after this many consecutive outer iterations
# with relative objective change below tol.
EARLY_STOP_PATIENCE = 10


class NonFiniteIterateError(RuntimeError):
    """A solver iterate became NaN/Inf; the message carries the iteration index."""


def soft_threshold(x, tau: float):
    """Soft shrinkage ``sign(x) * max(|x| - tau, 0)``, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


@dataclass(frozen=True)
class AdmmParams:
    """Penalty weights and iteration budgets shared by the three solvers.

    mu_a is the A-step penalty; mu_b1 / mu_b2 weight the two B-step splits
    (on ``B`` itself and on the product ``D B``).  ``lam`` is the sparsity
    weight used only by :func:`suns`.  T outer iterations each run T1
    A-step and T2 B-step inner updates.  ``tol`` enables early stopping on
    relative objective change (0 disables, the default, reproducing
    fixed-budget behavior).

    Defaults are the simulated-data profile; :meth:`for_profile` switches
    between tuning profiles.
    """

    mu_a: float = 50.0
    mu_b1: float = 2.0
    mu_b2: float = 1.0
    lam: float = 0.01
    T: int = 10000
    T1: int = 5
    T2: int = 5
    tol: float = 0.0

    def __post_init__(self):
        for name in ("mu_a", "mu_b1", "mu_b2"):
            if not float(getattr(self, name)) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam!r}")
        for name in ("T", "T1", "T2"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be nonnegative, got {self.tol!r}")

    @classmethod
    def for_profile(cls, profile: str, method: str = "fasun", **overrides) -> "AdmmParams":
        """Return tuned defaults for a data profile ("simulated" or "real").

        The real-data profile differs between methods (suns carries a larger
        B-split penalty and sparsity weight).  Keyword overrides replace
        individual fields.
        """
        method = method.lower()
        if method not in ("fclsu", "fasun", "suns"):
            raise ValueError(f"unknown method {method!r}")
        if profile == "simulated":
            base = dict(mu_a=50.0, mu_b1=2.0, mu_b2=1.0, lam=0.01)
        elif profile == "real":
            base = dict(mu_a=400.0, mu_b1=100.0 if method == "suns" else 20.0,
                        mu_b2=1.0, lam=0.1)
        else:
            raise ValueError(f"unknown profile {profile!r} (expected 'simulated' or 'real')")
        base.update(T=10000, T1=5, T2=5, tol=0.0)
        base.update(overrides)
        return cls(**base)


class Residuals(NamedTuple):
    """Frobenius norms of the split-consensus gaps."""

    a_split: float                 # ||A - S||_F
    b_split: Optional[float]       # ||B - S1||_F (None for fclsu)
    db_split: Optional[float]      # ||D B - S2||_F (None for fclsu)


@dataclass
class Diagnostics:
    """Per-run convergence record attached to every result."""

    objective_history: list[float]
    residuals: Residuals
    asc_dev_max: float  # worst |column sum - 1| over every abundance update
    iterations: int


@dataclass
class UnmixResult:
    """Solver output.

    ``A_raw`` is the last equality-constrained abundance iterate: columns
    sum to one exactly (to roundoff) but may carry tiny negatives.
    ``A_feasible`` clips negatives and renormalizes each column, satisfying
    both constraints; metrics default to it.  ``B_hat`` is None for the
    supervised solver; otherwise ``E_hat = D @ B_hat``.
    """

    A_raw: np.ndarray
    A_feasible: np.ndarray
    B_hat: Optional[np.ndarray]
    E_hat: np.ndarray
    diagnostics: Diagnostics


@dataclass
class SolverState:
    """All iterates of one run: abundances, mixing weights, splits, duals.

    Owned by exactly one run; the step functions mutate only the variables
    their block updates.  ``asc_dev_max`` / ``b_asc_dev_max`` accumulate the
    worst column-sum deviation seen across every equality-constrained update
    of ``A`` / ``B``, so a whole run's constraint behavior can be audited
    after the fact.
    """

    A: np.ndarray   # r x n abundances
    B: np.ndarray   # m x r mixing weights
    S: np.ndarray   # r x n A-step split
    L: np.ndarray   # r x n A-step dual
    S1: np.ndarray  # m x r B-split
    S2: np.ndarray  # p x r product split
    L1: np.ndarray  # m x r dual
    L2: np.ndarray  # p x r dual
    iteration: int = 0
    objective_history: list[float] = field(default_factory=list)
    asc_dev_max: float = 0.0
    b_asc_dev_max: float = 0.0

    @classmethod
    def zeros(cls, dims: ModelDims) -> "SolverState":
        """Zero-initialized state (the documented starting point of both solvers)."""
        p, n, m, r = dims.p, dims.n, dims.m, dims.r
        return cls(
            A=np.zeros((r, n), order="F"),
            B=np.zeros((m, r), order="F"),
            S=np.zeros((r, n), order="F"),
            L=np.zeros((r, n), order="F"),
            S1=np.zeros((m, r), order="F"),
            S2=np.zeros((p, r), order="F"),
            L1=np.zeros((m, r), order="F"),
            L2=np.zeros((p, r), order="F"),
        )

    def dims_for(self, Y: np.ndarray, D: np.ndarray) -> ModelDims:
        """Cross-check state shapes against the data; returns the dims."""
        r, n = self.A.shape
        m = self.B.shape[0]
        p = Y.shape[0]
        if self.B.shape[1] != r:
            raise DimensionMismatchError(
                f"B cols = {self.B.shape[1]} must equal A rows = {r}"
            )
        if Y.shape[1] != n:
            raise DimensionMismatchError(f"Y cols = {Y.shape[1]} must equal A cols = {n}")
        if D.shape != (p, m):
            raise DimensionMismatchError(f"D shape {D.shape} must be ({p}, {m})")
        for name, mat, shape in (
            ("S", self.S, (r, n)), ("L", self.L, (r, n)),
            ("S1", self.S1, (m, r)), ("L1", self.L1, (m, r)),
            ("S2", self.S2, (p, r)), ("L2", self.L2, (p, r)),
        ):
            if mat.shape != shape:
                raise DimensionMismatchError(f"{name} shape {mat.shape} must be {shape}")
        return ModelDims(p=p, n=n, m=m, r=r)

    def residuals(self, D: Optional[np.ndarray] = None) -> Residuals:
        a_split = float(np.linalg.norm(self.A - self.S))
        if D is None:
            return Residuals(a_split, None, None)
        return Residuals(
            a_split,
            float(np.linalg.norm(self.B - self.S1)),
            float(np.linalg.norm(D @ self.B - self.S2)),
        )

    def check_finite(self, where: str) -> None:
        for name in ("A", "B", "S", "L", "S1", "S2", "L1", "L2"):
            if not np.isfinite(getattr(self, name)).all():
                raise NonFiniteIterateError(
                    f"non-finite values in {name} during {where} "
                    f"(outer iteration {self.iteration + 1})"
                )


def _require_count(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
    return int(value)


def _operand(M, name: str) -> np.ndarray:
    """Light coercion for the step functions' data arguments.

    The drivers validate Y and D fully (finite entries, layout) once per
    run; re-scanning them on every step call would double the memory
    traffic, so steps only enforce shape here.  Non-finite data surfaces
    through the per-step state checks instead.
    """
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    return arr


def _track_col_sum_dev(M: np.ndarray) -> float:
    return float(np.abs(M.sum(axis=0) - 1.0).max())


def a_step(state: SolverState, Y, D, params: AdmmParams, n_iter: Optional[int] = None) -> SolverState:
    """Run the abundance block: ``n_iter`` ADMM updates of (A, S, L).

    The endmembers ``E = D @ B`` are held fixed for the whole step, so the
    equality-constrained factors are computed once and reused.  Each update
    cycles the closed-form abundance solve, the nonnegative projection
    ``S = max(0, A + L)``, and the dual ascent ``L += A - S``.  Only A, S, L
    (and the constraint audit) are touched; defaults to ``params.T1``
    updates.
    """
    n_iter = _require_count(params.T1 if n_iter is None else n_iter, "T1")
    Y = _operand(Y, "Y")
    D = _operand(D, "D")
    state.dims_for(Y, D)
    state.check_finite("a_step")
    E = D @ state.B
    if not np.isfinite(E).all():
        raise NonFiniteIterateError(
            f"non-finite endmember product during a_step "
            f"(outer iteration {state.iteration + 1})"
        )
    factors = quec_factorize(E, params.mu_a)
    _a_inner(state, factors, E.T @ Y, params.mu_a, n_iter)
    state.check_finite("a_step")
    return state


def _a_inner(state: SolverState, factors: QuecFactors, ety: np.ndarray,
             mu: float, n_iter: int) -> None:
    for _ in range(n_iter):
        state.A = quec_solve(factors, ety + mu * (state.S - state.L))
        dev = _track_col_sum_dev(state.A)
        if dev > state.asc_dev_max:
            state.asc_dev_max = dev
        state.S = np.maximum(0.0, state.A + state.L)
        state.L = state.L + state.A - state.S


def b_step_fasun(state: SolverState, Y, D, params: AdmmParams,
                 n_iter: Optional[int] = None, *,
                 d_factors: Optional[QuecFactors] = None) -> SolverState:
    """Run the convexity-constrained mixing block: ``n_iter`` updates of (B, S1, S2, L1, L2).

    With ``A`` fixed, each update solves the equality-constrained problem
    for ``B`` (columns summing to one, penalty ratio mu_b1/mu_b2), projects
    ``S1 = max(0, B + L1)``, refits the product split

        S2 = (Y A^T + mu_b2 (D B + L2)) (A A^T + mu_b2 I)^{-1},

    and ascends both duals.  ``A A^T + mu_b2 I`` changes only between outer
    iterations, so its factorization is computed once per call; the library
    factors depend only on (D, mu_b1/mu_b2) and may be passed in to be
    reused across the whole run.
    """
    n_iter = _require_count(params.T2 if n_iter is None else n_iter, "T2")
    Y = _operand(Y, "Y")
    D = _operand(D, "D")
    dims = state.dims_for(Y, D)
    state.check_finite("b_step_fasun")
    ratio = params.mu_b1 / params.mu_b2
    if d_factors is None:
        d_factors = quec_factorize(D, ratio)
    elif d_factors.k != dims.m:
        raise DimensionMismatchError(
            f"d_factors solve dimension {d_factors.k} must equal m = {dims.m}"
        )
    mu2 = params.mu_b2
    gram = state.A @ state.A.T
    gram[np.diag_indices(dims.r)] += mu2
    gram_chol = cho_factor(gram, lower=True)
    YAt = Y @ state.A.T
    for _ in range(n_iter):
        rhs = D.T @ (state.S2 - state.L2) + ratio * (state.S1 - state.L1)
        state.B = quec_solve(d_factors, rhs)
        dev = _track_col_sum_dev(state.B)
        if dev > state.b_asc_dev_max:
            state.b_asc_dev_max = dev
        state.S1 = np.maximum(0.0, state.B + state.L1)
        DB = D @ state.B
        # check_finite off: overflow inside the loop propagates as NaN/Inf
        # and is reported with its iteration index by the exit check below
        state.S2 = cho_solve(gram_chol, (YAt + mu2 * (DB + state.L2)).T,
                             check_finite=False).T
        state.L1 = state.L1 + state.B - state.S1
        state.L2 = state.L2 + DB - state.S2
    state.check_finite("b_step_fasun")
    return state


def b_step_suns(state: SolverState, Y, D, params: AdmmParams,
                n_iter: Optional[int] = None, *,
                gamma_chol=None) -> SolverState:
    """Run the sparse mixing block: ``n_iter`` updates of (B, S1, S2, L1, L2).

    The unconstrained ridge solve for ``B`` uses the factorization of
    ``mu_b1 I + mu_b2 D^T D`` (independent of the iterates, so it may be
    precomputed once per run and passed in).  ``S1`` applies soft shrinkage
    with threshold lam/mu_b1 followed by clipping to [0, 1]; the product
    split and duals are identical to the convexity-constrained block.  No
    sum-to-one constraint is placed on ``B``.
    """
    n_iter = _require_count(params.T2 if n_iter is None else n_iter, "T2")
    Y = _operand(Y, "Y")
    D = _operand(D, "D")
    dims = state.dims_for(Y, D)
    state.check_finite("b_step_suns")
    mu1, mu2 = params.mu_b1, params.mu_b2
    if gamma_chol is None:
        gamma_chol = _suns_gamma_chol(D, mu1, mu2)
    tau = params.lam / mu1
    gram = state.A @ state.A.T
    gram[np.diag_indices(dims.r)] += mu2
    gram_chol = cho_factor(gram, lower=True)
    YAt = Y @ state.A.T
    for _ in range(n_iter):
        rhs = mu1 * (state.S1 - state.L1) + mu2 * (D.T @ (state.S2 - state.L2))
        state.B = cho_solve(gamma_chol, rhs, check_finite=False)
        state.S1 = np.clip(soft_threshold(state.B + state.L1, tau), 0.0, 1.0)
        DB = D @ state.B
        state.S2 = cho_solve(gram_chol, (YAt + mu2 * (DB + state.L2)).T,
                             check_finite=False).T
        state.L1 = state.L1 + state.B - state.S1
        state.L2 = state.L2 + DB - state.S2
    state.check_finite("b_step_suns")
    return state


def _suns_gamma_chol(D: np.ndarray, mu1: float, mu2: float):
    m = D.shape[1]
    G = mu2 * (D.T @ D)
    G[np.diag_indices(m)] += mu1
    return cho_factor(G, lower=True)


def _clip_renormalize(A: np.ndarray) -> np.ndarray:
    """Project abundances onto feasibility: clip negatives, renormalize columns.

    Columns of the input sum to one, so at least one entry per column is
    positive and the renormalization is always well defined.
    """
    F = np.maximum(A, 0.0)
    F /= F.sum(axis=0)[None, :]
    return F


def _finalize(state: SolverState, D: Optional[np.ndarray], E: Optional[np.ndarray]) -> UnmixResult:
    if D is not None:
        B_hat = state.B.copy()
        E_hat = D @ B_hat
        residuals = state.residuals(D)
    else:
        B_hat = None
        E_hat = E
        residuals = state.residuals(None)
    return UnmixResult(
        A_raw=state.A,
        A_feasible=_clip_renormalize(state.A),
        B_hat=B_hat,
        E_hat=E_hat,
        diagnostics=Diagnostics(
            objective_history=state.objective_history,
            residuals=residuals,
            asc_dev_max=state.asc_dev_max,
            iterations=state.iteration,
        ),
    )


def fclsu_admm(Y, E, params: Optional[AdmmParams] = None,
               iters: Optional[int] = None) -> UnmixResult:
    """Fully constrained supervised unmixing with known endmembers.

    Minimizes ``0.5 ||Y - E A||_F^2`` over abundances with nonnegative,
    sum-to-one columns by ADMM: closed-form equality-constrained solve,
    nonnegative projection of the split, dual ascent.  The sum-to-one
    constraint holds exactly at every iterate; nonnegativity is approached
    as the split gap ``||A - S||_F`` vanishes.  Runs exactly ``iters``
    cycles (default ``params.T``) from zero-initialized split and dual.
    """
    params = params or AdmmParams()
    iters = _require_count(params.T if iters is None else iters, "iters")
    Y = as_matrix(Y, "Y")
    E = as_matrix(E, "E")
    if Y.shape[0] != E.shape[0]:
        raise DimensionMismatchError(
            f"Y rows (bands) = {Y.shape[0]} must equal E rows = {E.shape[0]}"
        )
    r, n = E.shape[1], Y.shape[1]
    factors = quec_factorize(E, params.mu_a)
    ety = E.T @ Y
    state = SolverState(
        A=np.zeros((r, n), order="F"), B=np.zeros((1, r)),
        S=np.zeros((r, n), order="F"), L=np.zeros((r, n), order="F"),
        S1=np.zeros((1, r)), S2=np.zeros((1, r)),
        L1=np.zeros((1, r)), L2=np.zeros((1, r)),
    )
    for t in range(iters):
        _a_inner(state, factors, ety, params.mu_a, 1)
        state.iteration = t + 1
        resid = Y - E @ state.A
        state.objective_history.append(float(0.5 * np.vdot(resid, resid).real))
    state.check_finite("fclsu_admm")
    return _finalize(state, None, E)


def _outer_loop(Y, D, r: int, params: AdmmParams, b_step, b_kwargs) -> UnmixResult:
    Y = as_matrix(Y, "Y")
    D = as_matrix(D, "D")
    if Y.shape[0] != D.shape[0]:
        raise DimensionMismatchError(
            f"Y rows (bands) = {Y.shape[0]} must equal D rows = {D.shape[0]}"
        )
    dims = ModelDims(p=Y.shape[0], n=Y.shape[1], m=D.shape[1], r=r)
    state = SolverState.zeros(dims)
    calm_streak = 0
    for t in range(params.T):
        a_step(state, Y, D, params)
        b_step(state, Y, D, params, **b_kwargs)
        state.iteration = t + 1
        # same arithmetic as core.objective_value, minus the per-call input
        # validation that would rescan Y every outer iteration
        resid = Y - (D @ state.B) @ state.A
        obj = float(0.5 * np.vdot(resid, resid).real)
        state.objective_history.append(obj)
        if params.tol > 0.0 and t >= 1:
            prev = state.objective_history[-2]
            rel = abs(obj - prev) / max(abs(prev), np.finfo(float).tiny)
            calm_streak = calm_streak + 1 if rel < params.tol else 0
            if calm_streak >= EARLY_STOP_PATIENCE:
                break
    return _finalize(state, D, None)


def fasun(Y, D, r: int, params: Optional[AdmmParams] = None) -> UnmixResult:
    """Semi-supervised unmixing with convexity-constrained mixing weights.

    Alternates the abundance and mixing blocks for ``params.T`` outer
    iterations (or until early stopping, when ``params.tol > 0``).  Both
    ``A`` and ``B`` keep exact column sums of one throughout; the estimated
    endmembers ``E_hat = D @ B_hat`` are convex combinations of library
    atoms, which absorbs scaling mismatch between the scene and the library.

    With the documented zero initialization of ``B``, the first abundance
    block sees zero endmembers and lands on uniform columns ``1/r``; this is
    expected behavior, not an error.  Because that start is symmetric in the
    endmember slots, the recovered slot order is an arbitrary (deterministic)
    permutation: match ``E_hat`` columns to references before comparing
    abundances row-wise.  ``params.lam`` is ignored.
    """
    params = params or AdmmParams()
    D = as_matrix(D, "D")
    d_factors = quec_factorize(D, params.mu_b1 / params.mu_b2)
    return _outer_loop(Y, D, r, params, b_step_fasun, {"d_factors": d_factors})


def suns(Y, D, r: int, params: Optional[AdmmParams] = None) -> UnmixResult:
    """Semi-supervised unmixing with soft-shrinkage sparse mixing weights.

    Same outer structure as :func:`fasun` (including the arbitrary slot
    order); the mixing block replaces the sum-to-one constraint with an l1
    penalty of weight ``params.lam`` and a [0, 1] box, so few library atoms
    contribute to each estimated endmember.  Abundances still satisfy both
    simplex constraints.
    """
    params = params or AdmmParams()
    D = as_matrix(D, "D")
    gamma_chol = _suns_gamma_chol(D, params.mu_b1, params.mu_b2)
    return _outer_loop(Y, D, r, params, b_step_suns, {"gamma_chol": gamma_chol})
