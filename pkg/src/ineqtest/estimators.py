"""Scikit-learn style front end.

The tests consume a sample of moment evaluations exactly the way an sklearn
estimator consumes a feature matrix, so the wrappers follow that protocol:
constraint system and level are hyperparameters, ``fit(X)`` ingests the n x
d_m moment sample, and the decision is exposed through fitted attributes.
``get_params``/``set_params``/``clone`` work as usual, so the objects compose
with sklearn tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .fullvector import FullVectorProblem, run_test, sample_variance
from .inference import GridSpec, invert_test
from .linalg import DEFAULT_TOLERANCES, PolyhedralSpec
from .subvector import SubvectorProblem, cond_var_discrete, cond_var_nearest_neighbor, run_subvector_test


def _check_moments(x):
    return check_array(x, dtype=float, ensure_min_samples=2)


class MomentInequalityTest(BaseEstimator):
    """Full-vector test of A E[m] <= b from a sample of moment observations.

    Parameters
    ----------
    a_mat, b : constraint system defining the null polyhedron.
    alpha : significance level in (0, 1/2].
    variant : "rcc" (refined, size-exact) or "cc".
    sigma : optional fixed variance of sqrt(n) * mean; estimated from the
        sample (divisor n) when None.
    ridge : optional relative ridge added to a non-invertible sigma estimate.
    tol : numerical tolerance bundle.
    """

    def __init__(self, a_mat=None, b=None, alpha=0.05, variant="rcc",
                 sigma=None, ridge=0.0, tol=DEFAULT_TOLERANCES):
        self.a_mat = a_mat
        self.b = b
        self.alpha = alpha
        self.variant = variant
        self.sigma = sigma
        self.ridge = ridge
        self.tol = tol

    def fit(self, X, y=None):
        x = _check_moments(X)
        sigma = np.asarray(self.sigma, dtype=float) if self.sigma is not None \
            else sample_variance(x)
        problem = FullVectorProblem(
            m_bar=x.mean(axis=0), sigma=sigma, n=x.shape[0],
            spec=PolyhedralSpec(self.a_mat, self.b), alpha=self.alpha,
            ridge=self.ridge, tol=self.tol)
        out = run_test(problem, self.variant)
        self.outcome_ = out
        self.statistic_ = out.statistic
        self.mu_hat_ = out.mu_hat
        self.active_set_ = out.active_set
        self.rank_ = out.rank
        self.tau_ = out.tau
        self.beta_ = out.beta
        self.critical_value_ = out.critical_value
        self.reject_ = out.reject
        self.n_features_in_ = x.shape[1]
        return self

    def predict(self, X=None):
        """Decision for the fitted sample: True means the null is rejected."""
        if not hasattr(self, "reject_"):
            raise NotFittedError("call fit before predict")
        return self.reject_


class SubvectorInequalityTest(BaseEstimator):
    """Subvector test of exists delta: B E[m|Z] - C delta <= d.

    ``fit(X, Z=...)`` takes the moment sample and, for the matched variance
    estimator, the conditioning variables; ``variance`` selects
    "nearest_neighbor" (default), "discrete" (Z holds category labels), or a
    fixed matrix.
    """

    def __init__(self, b_mat=None, c_mat=None, d=None, alpha=0.05,
                 variant="srcc", variance="nearest_neighbor", seed=0,
                 tol=DEFAULT_TOLERANCES):
        self.b_mat = b_mat
        self.c_mat = c_mat
        self.d = d
        self.alpha = alpha
        self.variant = variant
        self.variance = variance
        self.seed = seed
        self.tol = tol

    def fit(self, X, y=None, Z=None):
        x = _check_moments(X)
        if isinstance(self.variance, str):
            if Z is None:
                raise ValueError("the %r variance estimator needs Z" % self.variance)
            if self.variance == "nearest_neighbor":
                sigma = cond_var_nearest_neighbor(x, np.asarray(Z, dtype=float),
                                                  seed=self.seed, tol=self.tol)
            elif self.variance == "discrete":
                sigma = cond_var_discrete(x, np.asarray(Z))
            else:
                raise ValueError(f"unknown variance mode {self.variance!r}")
        else:
            sigma = np.asarray(self.variance, dtype=float)
        problem = SubvectorProblem(
            b_mat=self.b_mat, c_mat=self.c_mat, d=self.d, m_bar=x.mean(axis=0),
            sigma=sigma, n=x.shape[0], alpha=self.alpha, tol=self.tol)
        out = run_subvector_test(problem, self.variant)
        self.outcome_ = out
        self.statistic_ = out.statistic
        self.mu_hat_ = out.mu_hat
        self.delta_hat_ = out.delta_hat
        self.rank_ = out.rank
        self.tau_ = out.tau
        self.beta_ = out.beta
        self.critical_value_ = out.critical_value
        self.reject_ = out.reject
        self.n_features_in_ = x.shape[1]
        return self

    def predict(self, X=None):
        if not hasattr(self, "reject_"):
            raise NotFittedError("call fit before predict")
        return self.reject_


class InequalityConfidenceSet(BaseEstimator):
    """Confidence set by test inversion over a parameter grid.

    ``moment_fn(X, theta)`` maps the raw sample to the n x d_m moment
    evaluations at ``theta``; the constraint system may be fixed arrays or
    callables of theta.  After ``fit`` the retained grid points are in
    ``retained_`` and per-point outcomes in ``report_``.
    """

    def __init__(self, moment_fn=None, a_mat=None, b=None, grid=None,
                 alpha=0.05, variant="rcc", sigma=None, threads=1,
                 tol=DEFAULT_TOLERANCES):
        self.moment_fn = moment_fn
        self.a_mat = a_mat
        self.b = b
        self.grid = grid
        self.alpha = alpha
        self.variant = variant
        self.sigma = sigma
        self.threads = threads
        self.tol = tol

    def _spec_at(self, theta):
        a = self.a_mat(theta) if callable(self.a_mat) else self.a_mat
        b = self.b(theta) if callable(self.b) else self.b
        return PolyhedralSpec(a, b)

    def fit(self, X, y=None):
        x = check_array(X, dtype=float, ensure_min_samples=2)

        def factory(theta):
            rows = np.asarray(self.moment_fn(x, theta), dtype=float)
            sigma = np.asarray(self.sigma, dtype=float) if self.sigma is not None \
                else sample_variance(rows)
            return FullVectorProblem(
                m_bar=rows.mean(axis=0), sigma=sigma, n=rows.shape[0],
                spec=self._spec_at(theta), alpha=self.alpha, tol=self.tol)

        grid = self.grid if isinstance(self.grid, GridSpec) else GridSpec(points=self.grid)
        report = invert_test(factory, grid, variant=self.variant,
                             alpha=self.alpha, threads=self.threads)
        self.report_ = report
        self.retained_ = report.retained
        return self

    def predict(self, X=None):
        if not hasattr(self, "retained_"):
            raise NotFittedError("call fit before predict")
        return self.retained_
