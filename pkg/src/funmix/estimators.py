"""scikit-learn style estimators wrapping the functional solvers.

These follow the decomposition-transformer convention: samples are pixels,
features are bands, so ``X`` has shape (n_pixels, n_bands) and
``transform(X)`` returns per-pixel abundances of shape (n_pixels,
n_endmembers).  ``components_`` holds the endmember spectra as rows, so
``X ~ transform(X) @ components_`` just like ``sklearn.decomposition.NMF``.
The functional API in :mod:`funmix.solvers` uses the transposed, domain
(bands x pixels) orientation; these wrappers exist so the solvers compose
with pipelines, ``clone``, and grid search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .solvers import AdmmParams, fasun, fclsu_admm, suns

__all__ = ["Fclsu", "Fasun", "Suns"]


def _check_pixels(X, n_bands=None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
    if n_bands is not None and X.shape[1] != n_bands:
        raise ValueError(f"X has {X.shape[1]} bands, expected {n_bands}")
    return X


class Fclsu(TransformerMixin, BaseEstimator):
    """Supervised abundance transformer with known endmember spectra.

    Parameters
    ----------
    endmembers : ndarray of shape (n_endmembers, n_bands)
        Endmember spectra, one per row.
    mu : float, default=50.0
        ADMM penalty weight.
    n_iter : int, default=1000
        Number of ADMM cycles per transform.
    """

    def __init__(self, endmembers=None, mu=50.0, n_iter=1000):
        self.endmembers = endmembers
        self.mu = mu
        self.n_iter = n_iter

    def _endmember_matrix(self) -> np.ndarray:
        if self.endmembers is None:
            raise ValueError("endmembers must be provided")
        E = check_array(self.endmembers, dtype=np.float64)
        return E

    def fit(self, X, y=None):
        E = self._endmember_matrix()
        X = _check_pixels(X, n_bands=E.shape[1])
        self.n_features_in_ = X.shape[1]
        self.components_ = E
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "components_")
        X = _check_pixels(X, n_bands=self.n_features_in_)
        params = AdmmParams(mu_a=self.mu, T=self.n_iter)
        result = fclsu_admm(X.T, self.components_.T, params, iters=self.n_iter)
        return np.ascontiguousarray(result.A_feasible.T)


class _LibraryUnmixer(TransformerMixin, BaseEstimator):
    """Shared scaffolding for the semi-supervised unmixers."""

    def _library_matrix(self) -> np.ndarray:
        if self.library is None:
            raise ValueError("library must be provided")
        return check_array(self.library, dtype=np.float64)

    def _params(self) -> AdmmParams:
        raise NotImplementedError

    def _solve(self, Y, D):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Estimate mixing weights, endmembers, and abundances from pixels X."""
        D = self._library_matrix()
        X = _check_pixels(X, n_bands=D.shape[1])
        self.n_features_in_ = X.shape[1]
        result = self._solve(X.T, D.T)
        self.mixing_ = np.ascontiguousarray(result.B_hat.T)
        self.components_ = np.ascontiguousarray(result.E_hat.T)
        self.abundances_ = np.ascontiguousarray(result.A_feasible.T)
        self.objective_history_ = list(result.diagnostics.objective_history)
        self.n_iter_ = result.diagnostics.iterations
        return self

    def fit_transform(self, X, y=None):
        """Fit and return the jointly estimated abundances (not a re-solve)."""
        return self.fit(X).abundances_

    def transform(self, X) -> np.ndarray:
        """Abundances of (possibly new) pixels under the fitted endmembers."""
        check_is_fitted(self, "components_")
        X = _check_pixels(X, n_bands=self.n_features_in_)
        params = AdmmParams(mu_a=self.mu_a, T=self.transform_iters)
        result = fclsu_admm(X.T, self.components_.T, params, iters=self.transform_iters)
        return np.ascontiguousarray(result.A_feasible.T)


class Fasun(_LibraryUnmixer):
    """Semi-supervised unmixer with convexity-constrained mixing weights.

    Fitted endmembers are convex combinations of library atoms; abundances
    and mixing rows both live on the probability simplex.

    Parameters
    ----------
    library : ndarray of shape (n_atoms, n_bands)
        Candidate endmember spectra, one per row.
    n_endmembers : int
        Number of scene endmembers r.
    mu_a, mu_b1, mu_b2 : float
        ADMM penalty weights (defaults are the simulated-data profile).
    n_outer, n_inner_a, n_inner_b : int
        Outer iterations and per-block inner iterations.
    tol : float, default=0.0
        Early stopping threshold on relative objective change (0 disables).
    transform_iters : int, default=1000
        Supervised ADMM cycles used by :meth:`transform`.
    """

    def __init__(self, library=None, n_endmembers=2, mu_a=50.0, mu_b1=2.0,
                 mu_b2=1.0, n_outer=2000, n_inner_a=5, n_inner_b=5,
                 tol=0.0, transform_iters=1000):
        self.library = library
        self.n_endmembers = n_endmembers
        self.mu_a = mu_a
        self.mu_b1 = mu_b1
        self.mu_b2 = mu_b2
        self.n_outer = n_outer
        self.n_inner_a = n_inner_a
        self.n_inner_b = n_inner_b
        self.tol = tol
        self.transform_iters = transform_iters

    def _params(self) -> AdmmParams:
        return AdmmParams(mu_a=self.mu_a, mu_b1=self.mu_b1, mu_b2=self.mu_b2,
                          T=self.n_outer, T1=self.n_inner_a, T2=self.n_inner_b,
                          tol=self.tol)

    def _solve(self, Y, D):
        return fasun(Y, D, self.n_endmembers, self._params())


class Suns(_LibraryUnmixer):
    """Semi-supervised unmixer with soft-shrinkage sparse mixing weights.

    Same interface as :class:`Fasun`; mixing weights are box-constrained to
    [0, 1] and sparsified with weight ``lam`` instead of being constrained
    to the simplex.
    """

    def __init__(self, library=None, n_endmembers=2, mu_a=50.0, mu_b1=2.0,
                 mu_b2=1.0, lam=0.01, n_outer=2000, n_inner_a=5, n_inner_b=5,
                 tol=0.0, transform_iters=1000):
        self.library = library
        self.n_endmembers = n_endmembers
        self.mu_a = mu_a
        self.mu_b1 = mu_b1
        self.mu_b2 = mu_b2
        self.lam = lam
        self.n_outer = n_outer
        self.n_inner_a = n_inner_a
        self.n_inner_b = n_inner_b
        self.tol = tol
        self.transform_iters = transform_iters

    def _params(self) -> AdmmParams:
        return AdmmParams(mu_a=self.mu_a, mu_b1=self.mu_b1, mu_b2=self.mu_b2,
                          lam=self.lam, T=self.n_outer, T1=self.n_inner_a,
                          T2=self.n_inner_b, tol=self.tol)

    def _solve(self, Y, D):
        return suns(Y, D, self.n_endmembers, self._params())
