"""Full-vector inequality tests with data-dependent chi-squared critical values.

The statistic is the minimum of n (m - mu)' Sigma^{-1} (m - mu) over the
polyhedron {A mu <= b}; the degrees of freedom equal the rank of the rows
active at the minimizer.  The plain variant compares against the 1 - alpha
chi-squared quantile.  The refined variant, when exactly one independent
direction is active, raises the level to 2 alpha Phi(tau), where tau measures
how far the remaining inequalities are from being active; this removes the
conservativeness caused by the event that nothing is active.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from ._validation import as_matrix, as_vector, check_alpha, check_symmetric
from .errors import CovarianceError, InternalInvariantError
from .linalg import (
    DEFAULT_TOLERANCES,
    PolyhedralSpec,
    Tolerances,
    cholesky_factor,
    matrix_rank,
    project_polyhedron,
)

VARIANT_CC = "cc"
VARIANT_RCC = "rcc"


@dataclass(frozen=True)
class FullVectorProblem:
    """Sample moments plus the polyhedron and level defining one test."""

    m_bar: np.ndarray
    sigma: np.ndarray          # estimate of Var(sqrt(n) * m_bar)
    n: int
    spec: PolyhedralSpec
    alpha: float = 0.05
    ridge: float = 0.0         # opt-in: sigma + ridge * mean(diag(sigma)) * I
    tol: Tolerances = field(default=DEFAULT_TOLERANCES)

    def __post_init__(self):
        m = as_vector(self.m_bar, "m_bar")
        sigma = check_symmetric(self.sigma, "sigma")
        if sigma.shape[0] != m.shape[0]:
            raise ValueError("sigma must be d_m x d_m for d_m = len(m_bar)")
        if self.spec.n_cols != m.shape[0]:
            raise ValueError("constraint matrix column count must match len(m_bar)")
        if self.spec.n_rows < 1:
            raise ValueError("the constraint system needs at least one row")
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        object.__setattr__(self, "m_bar", m)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    def effective_sigma(self):
        if self.ridge > 0.0:
            bump = self.ridge * float(np.mean(np.diag(self.sigma)))
            return self.sigma + bump * np.eye(self.sigma.shape[0])
        return self.sigma


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    mu_hat: np.ndarray
    active_set: np.ndarray | None
    rank: int
    tau: float | None          # None when the refinement fast path skipped it
    beta: float
    critical_value: float
    reject: bool
    variant: str
    delta_hat: np.ndarray | None = None

    def as_dict(self):
        return {
            "statistic": self.statistic,
            "r_hat": self.rank,
            "tau_hat": self.tau,
            "beta_hat": self.beta,
            "critical_value": self.critical_value,
            "reject": bool(self.reject),
            "variant": self.variant,
        }


def sample_variance(data):
    """Divisor-n sample variance matrix of the rows of ``data``."""
    x = as_matrix(data, "data")
    if x.shape[0] < 2:
        raise ValueError(f"sample variance needs n >= 2 rows, got {x.shape[0]}")
    centered = x - x.mean(axis=0)
    return centered.T @ centered / x.shape[0]


def compute_statistic(problem):
    """Returns (T, mu_hat, active_set, rank).

    T is the squared Sigma/n-metric distance from m_bar to the polyhedron,
    snapped to exactly zero below tol_zero_statistic so that a feasible
    sample mean deterministically yields an accepting test.
    """
    sigma = problem.effective_sigma()
    try:
        lower = cholesky_factor(sigma, problem.tol)
    except CovarianceError as exc:
        raise CovarianceError(
            f"moment variance estimate is not positive definite "
            f"(pivot {exc.pivot_index}); enable the ridge option to regularize",
            pivot_index=exc.pivot_index) from exc
    metric_chol = lower / math.sqrt(problem.n)
    proj = project_polyhedron(problem.m_bar, sigma / problem.n, problem.spec,
                              problem.tol, chol=metric_chol)
    stat = proj.distance_sq
    if stat <= problem.tol.tol_zero_statistic:
        stat = 0.0
    rank = matrix_rank(problem.spec.a_mat[proj.active_set], problem.tol)
    return stat, proj.mu_hat, proj.active_set, rank


def compute_tau(spec, mu_hat, sigma, n, active_set, tol=DEFAULT_TOLERANCES):
    """Scaled distance from the active face to the nearest other constraint.

    Requires the active rows to span exactly one direction (rank one).  The
    reference row is the lowest-index active row with nonzero coefficients;
    the value does not depend on that choice.
    """
    a = spec.a_mat
    b = spec.b
    active = np.asarray(active_set, dtype=int)
    nonzero_active = [j for j in active if np.max(np.abs(a[j])) > 0.0]
    if not nonzero_active:
        raise InternalInvariantError(
            "tau requires an active inequality with a nonzero row")
    j_ref = min(nonzero_active)
    if a.shape[0] == 1:
        return math.inf

    sig_a = a @ sigma @ a.T
    norms = np.sqrt(np.maximum(np.diag(sig_a), 0.0))
    ref_norm = norms[j_ref]
    slack = b - a @ mu_hat
    tau = math.inf
    for j in range(a.shape[0]):
        if j == j_ref:
            continue
        denom = ref_norm * norms[j] - sig_a[j_ref, j]
        if abs(denom) <= tol.tol_rank:
            continue
        tau_j = math.sqrt(n) * ref_norm * slack[j] / denom
        tau = min(tau, max(tau_j, 0.0))
    return tau


def compute_beta(rank, tau, alpha):
    """Refined level: 2 alpha Phi(tau) when exactly one direction is active."""
    alpha = check_alpha(alpha)
    if rank != 1:
        return alpha
    if tau is None:
        raise InternalInvariantError("beta with rank 1 requires tau")
    return 2.0 * alpha * dist.normal_cdf(tau)


def _cc_critical_value(rank, alpha):
    if rank == 0:
        return 0.0
    return dist.chi2_quantile(rank, 1.0 - alpha)


def refinement_window(alpha):
    """The statistic interval on which the refined test can differ from the plain one."""
    lo = dist.chi2_quantile(1, 1.0 - 2.0 * alpha) if 2.0 * alpha < 1.0 else 0.0
    hi = dist.chi2_quantile(1, 1.0 - alpha)
    return lo, hi


def run_test(problem, variant=VARIANT_RCC):
    """Run the plain or refined test and return a TestOutcome.

    The refinement is only evaluated when the rank is one and the statistic
    falls inside [chi2(1, 1-2a), chi2(1, 1-a)]; outside that window the two
    variants decide identically, so tau is skipped (fast path).
    """
    variant = str(variant).lower()
    if variant not in (VARIANT_CC, VARIANT_RCC):
        raise ValueError(f"variant must be 'cc' or 'rcc', got {variant!r}")
    stat, mu_hat, active, rank = compute_statistic(problem)
    alpha = problem.alpha
    tau = None
    beta = alpha
    cv = _cc_critical_value(rank, alpha)
    if variant == VARIANT_RCC and rank == 1:
        lo, hi = refinement_window(alpha)
        if lo <= stat <= hi:
            tau = compute_tau(problem.spec, mu_hat, problem.effective_sigma(),
                              problem.n, active, problem.tol)
            beta = compute_beta(rank, tau, alpha)
            cv = dist.chi2_quantile(1, 1.0 - beta)
    return TestOutcome(statistic=stat, mu_hat=mu_hat, active_set=active,
                       rank=rank, tau=tau, beta=beta, critical_value=cv,
                       reject=bool(stat > cv), variant=variant)
