"""Interval-regression design: data generation, moment construction, and the
identified-set linear programs.

A latent success probability follows a logit in an endogenous indicator and
exogenous binary covariates; only a binomial frequency estimate of it is
observed, which yields interval bounds on the log-odds and hence conditional
moment inequalities that are linear in the nuisance coefficients.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distributions import normal_cdf
from .errors import InfeasibleError
from .linalg import DEFAULT_TOLERANCES, solve_lp


@dataclass(frozen=True)
class IntervalRegressionDesign:
    """Parameters of the simulated interval-regression study."""

    n_trials: int = 100            # binomial trials behind each observed frequency
    s_floor: float = 0.00125       # lower truncation constant in the bounds
    theta0: float = -1.0
    d_c: int = 2                   # exogenous covariate dimension (incl. constant)
    delta0: tuple[float, ...] | None = None
    n_obs: int = 1000
    replications: int = 1000
    seed: int = 0
    ordered_pairs: bool = False    # count instrument pairs (j,l) and (l,j) separately

    def __post_init__(self):
        if self.n_trials < 100:
            raise ValueError("the bound construction requires at least 100 trials")
        if not 0.0 < self.s_floor <= 0.05:
            raise ValueError("s_floor must lie in (0, 0.05]")
        if self.d_c < 2:
            raise ValueError("d_c must be at least 2 (constant plus one covariate)")
        if self.delta0 is None:
            object.__setattr__(self, "delta0",
                               (0.0, -1.0) + (0.0,) * (self.d_c - 2))
        elif len(self.delta0) != self.d_c:
            raise ValueError("delta0 must have length d_c")
        if self.n_obs < 2 or self.replications < 1:
            raise ValueError("n_obs must be >= 2 and replications >= 1")

    def instrument_pairs(self):
        """Pairs of non-constant exogenous variables defining the cells."""
        n_var = self.d_c  # d_c - 1 covariates plus the excluded instrument
        if self.ordered_pairs:
            return [(a, b) for a in range(n_var) for b in range(n_var) if a != b]
        return [(a, b) for a in range(n_var) for b in range(a + 1, n_var)]

    @property
    def n_moments(self):
        return 8 * len(self.instrument_pairs())


@dataclass(frozen=True)
class IntervalRegressionData:
    """One simulated sample, stored theta-free.

    ``psi_upper0``/``psi_lower0`` are the log-odds bounds before the -x*theta
    shift; ``z_bin`` holds the non-constant exogenous variables (covariates
    then the excluded instrument) used for conditioning.
    """

    psi_upper0: np.ndarray
    psi_lower0: np.ndarray
    x: np.ndarray
    z_c: np.ndarray                # n x d_c including the leading constant
    z_bin: np.ndarray              # n x d_c, conditioning variables
    instruments: np.ndarray        # n x q cell indicators
    dropped_instruments: tuple[int, ...] = field(default=())


def draw_dataset(design, rng):
    """Simulate one dataset of ``design.n_obs`` observations."""
    n = design.n_obs
    eps = np.clip(rng.standard_normal(n), -4.0, 4.0)
    z_bin = (rng.random((n, design.d_c)) < 0.5).astype(float)
    z_e = z_bin[:, -1]
    z_c = np.hstack([np.ones((n, 1)), z_bin[:, :-1]])
    x = (z_e + eps / 2.0 > 0).astype(float)
    lin = x * design.theta0 + z_c @ np.asarray(design.delta0) + eps
    s_star = 1.0 / (1.0 + np.exp(-lin))
    s_n = rng.binomial(design.n_trials, s_star) / design.n_trials

    two_n = 2.0 / design.n_trials
    psi_upper0 = np.log(s_n + two_n) - np.log(1.0 - s_n + design.s_floor)
    psi_lower0 = np.log(s_n + design.s_floor) - np.log(1.0 - s_n + two_n)

    cols = []
    for a, b in design.instrument_pairs():
        za, zb = z_bin[:, a], z_bin[:, b]
        cols += [za * zb, za * (1.0 - zb), (1.0 - za) * zb, (1.0 - za) * (1.0 - zb)]
    instruments = np.column_stack(cols)
    dropped = tuple(int(j) for j in np.flatnonzero(instruments.sum(axis=0) == 0))
    if dropped:
        warnings.warn(
            f"dropping {len(dropped)} empty instrument cell(s): {dropped}",
            RuntimeWarning, stacklevel=2)
        instruments = np.delete(instruments, dropped, axis=1)
    return IntervalRegressionData(psi_upper0=psi_upper0, psi_lower0=psi_lower0,
                                  x=x, z_c=z_c, z_bin=z_bin,
                                  instruments=instruments,
                                  dropped_instruments=dropped)


def moment_rows(data, theta):
    """Per-observation moment matrix (n x 2q): lower bounds then negated uppers."""
    psi_l = data.psi_lower0 - data.x * theta
    psi_u = data.psi_upper0 - data.x * theta
    return np.hstack([psi_l[:, None] * data.instruments,
                      -psi_u[:, None] * data.instruments])


def nuisance_loadings(data):
    """Per-observation coefficient stacks C_{z_i} (n x 2q x d_c)."""
    upper = data.instruments[:, :, None] * data.z_c[:, None, :]
    return np.concatenate([upper, -upper], axis=1)


def nuisance_matrix(data):
    """Sample-average coefficient matrix on the nuisance vector (2q x d_c)."""
    return nuisance_loadings(data).mean(axis=0)


def psi_midpoint(data, theta):
    """Average of the two log-odds bounds at ``theta`` (initializer target)."""
    return 0.5 * (data.psi_upper0 + data.psi_lower0) - data.x * theta


# ---------------------------------------------------------------------------
# Identified set (d_c = 2): simulated conditional means + two LPs
# ---------------------------------------------------------------------------

def _binomial_pmf_matrix(s, n_trials, log_pmf_const):
    """Row i = pmf of Binomial(n_trials, s_i) over counts 0..n_trials."""
    counts = np.arange(n_trials + 1)
    s = np.clip(s, 1e-12, 1.0 - 1e-12)
    log_pmf = (log_pmf_const[None, :]
               + counts[None, :] * np.log(s)[:, None]
               + (n_trials - counts)[None, :] * np.log(1.0 - s)[:, None])
    return np.exp(log_pmf)


def conditional_bound_means(design, draws, seed=0, chunk=50_000):
    """Simulated E[Y_U | z], E[Y_L | z] and exact E[X | z] for z in {0,1}^2.

    Rows are ordered (z_c, z_e) = (0,0), (0,1), (1,0), (1,1).
    """
    if design.d_c != 2:
        raise ValueError("the identified-set computation is defined for d_c = 2")
    if draws < 100_000:
        raise ValueError("need at least 1e5 simulation draws")
    n_tr = design.n_trials
    counts = np.arange(n_tr + 1)
    log_pmf_const = np.array([math.lgamma(n_tr + 1) - math.lgamma(c + 1)
                              - math.lgamma(n_tr - c + 1) for c in counts])
    floor_shift = n_tr * design.s_floor
    delta0 = np.asarray(design.delta0)
    # E[log(K' + c)] for K' ~ Bin(n, 1-s) equals the same pmf contracted with
    # the count-reversed log vector, so one pmf matrix serves all four terms
    log_plus_two = np.log(counts + 2.0)
    log_plus_floor = np.log(counts + floor_shift)
    up_vec = log_plus_two - log_plus_floor[::-1]
    lo_vec = log_plus_floor - log_plus_two[::-1]

    cells = [(zc, ze) for zc in (0.0, 1.0) for ze in (0.0, 1.0)]
    ey_u = np.zeros(4)
    ey_l = np.zeros(4)
    rng = np.random.default_rng(seed)
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        eps = np.clip(rng.standard_normal(m), -4.0, 4.0)
        for idx, (zc, ze) in enumerate(cells):
            x = (2.0 * ze + eps > 0).astype(float)
            lin = x * design.theta0 + delta0[0] + delta0[1] * zc + eps
            s_star = 1.0 / (1.0 + np.exp(-lin))
            pmf = _binomial_pmf_matrix(s_star, n_tr, log_pmf_const)
            ey_u[idx] += float(np.sum(pmf @ up_vec))
            ey_l[idx] += float(np.sum(pmf @ lo_vec))
        done += m
    ey_u /= draws
    ey_l /= draws
    ex = np.array([normal_cdf(2.0 * ze) for _, ze in cells])
    return ey_u, ey_l, ex


def interval_bound_lp(ey_u, ey_l, ex, tol=DEFAULT_TOLERANCES):
    """Min and max of theta subject to existence of (delta1, delta2) with
    E[Y_L|z] - E[X|z] theta <= delta1 + delta2 z_c <= E[Y_U|z] - E[X|z] theta
    for the four z cells.  Raises InfeasibleError when no theta qualifies.
    """
    ey_u = np.asarray(ey_u, dtype=float)
    ey_l = np.asarray(ey_l, dtype=float)
    ex = np.asarray(ex, dtype=float)
    cells = [(zc, ze) for zc in (0.0, 1.0) for ze in (0.0, 1.0)]
    # free variables (theta, d1, d2) plus one slack per inequality row
    rows = []
    rhs = []
    for idx, (zc, _) in enumerate(cells):
        rows.append([-ex[idx], -1.0, -zc])     # upper: ey_u - ex*th - d1 - d2 zc >= 0
        rhs.append(-ey_u[idx])
        rows.append([ex[idx], 1.0, zc])        # lower: d1 + d2 zc - ey_l + ex*th >= 0
        rhs.append(ey_l[idx])
    m = len(rows)
    a_eq = np.hstack([np.asarray(rows), -np.eye(m)])
    bounds = [(-math.inf, math.inf)] * 3 + [(0.0, math.inf)] * m
    ends = []
    for sign in (1.0, -1.0):
        c = np.concatenate([[sign, 0.0, 0.0], np.zeros(m)])
        res = solve_lp(c, (a_eq, np.asarray(rhs)), bounds, tol)
        if res.status == "infeasible":
            raise InfeasibleError("the bound system admits no parameter value")
        if res.status == "unbounded":
            ends.append(-math.inf if sign > 0 else math.inf)
        else:
            ends.append(sign * res.value)
    return ends[0], ends[1]


def identified_set(design, draws=1_000_000, seed=0, tol=DEFAULT_TOLERANCES):
    """Identified interval for the parameter of interest in the d_c = 2 design."""
    ey_u, ey_l, ex = conditional_bound_means(design, draws, seed)
    return interval_bound_lp(ey_u, ey_l, ex, tol)
