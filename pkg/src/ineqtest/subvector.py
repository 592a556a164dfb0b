"""Subvector tests for linear conditional moment inequality systems.

The model restricts B E[m | Z] - C delta <= d for some value of the nuisance
vector delta.  Eliminating delta (left-multiplying by the vertices of
{h >= 0, C'h = 0, 1'h = 1}) reduces this to a full-vector system, but the
vertex count can explode, so the statistic is computed as a joint quadratic
program in (mu, delta) and the active rank is recovered from the parametric
form of the cone {h >= 0, C'h = 0, h'(B mu_hat - d) = 0} using one small LP
per coordinate.  Explicit vertex enumeration is only performed for the
refinement step, and then only when the statistic lands in the narrow window
where the refinement can change the decision.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from ._validation import as_matrix, as_vector, check_alpha, check_symmetric
from .errors import CovarianceError, InternalInvariantError, NumericalError
from .fullvector import TestOutcome, compute_beta, compute_tau, refinement_window
from .linalg import (
    DEFAULT_TOLERANCES,
    PolyhedralSpec,
    Tolerances,
    _rre_augmented,
    cholesky_factor,
    matrix_rank,
    project_polyhedron,
    enumerate_vertices,
    solve_lp,
)

VARIANT_SCC = "scc"
VARIANT_SRCC = "srcc"

# Relative weight of the delta ridge in the working-set discovery solve.  The
# ridge exists only to make that solve strictly convex: the returned point is
# re-solved exactly without it, so the weight trades conditioning against
# nothing.  A much smaller value (1e-10) makes the whitened geometry so
# anisotropic that double precision produces false infeasibility certificates.
_DELTA_RIDGE_REL = 1e-6


@dataclass(frozen=True)
class SubvectorProblem:
    """Moments, constraint system and level for one subvector test."""

    b_mat: np.ndarray          # k x d_m
    c_mat: np.ndarray          # k x p
    d: np.ndarray              # k
    m_bar: np.ndarray          # d_m
    sigma: np.ndarray          # estimate of Var(sqrt(n) m_bar | Z)
    n: int
    alpha: float = 0.05
    tol: Tolerances = field(default=DEFAULT_TOLERANCES)

    def __post_init__(self):
        b = as_matrix(self.b_mat, "b_mat")
        c = as_matrix(self.c_mat, "c_mat", shape=(b.shape[0], None))
        d = as_vector(self.d, "d", length=b.shape[0])
        m = as_vector(self.m_bar, "m_bar", length=b.shape[1])
        sigma = check_symmetric(self.sigma, "sigma")
        if sigma.shape[0] != m.shape[0]:
            raise ValueError("sigma must be d_m x d_m for d_m = len(m_bar)")
        if c.shape[1] < 1:
            raise ValueError("the nuisance dimension p must be at least 1")
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")
        for name, val in (("b_mat", b), ("c_mat", c), ("d", d), ("m_bar", m), ("sigma", sigma)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    @property
    def k(self):
        return self.b_mat.shape[0]

    @property
    def p(self):
        return self.c_mat.shape[1]

    @property
    def d_m(self):
        return self.b_mat.shape[1]


@dataclass(frozen=True)
class EliminatedSystem:
    """Explicit full-vector system obtained by vertex elimination."""

    h_mat: np.ndarray          # vertices, one per row
    a_z: np.ndarray            # h_mat @ b_mat
    b_z: np.ndarray            # h_mat @ d

    @property
    def empty(self):
        return self.h_mat.shape[0] == 0


def compute_statistic_sub(problem):
    """Returns (T, mu_hat, delta_hat) for the joint program.

    Solved as a strictly convex projection by adding a micro-ridge
    eps * ||delta - delta0||^2 (eps = 1e-10 trace(sigma^{-1}), delta0 a
    least-squares feasibility start).  The ridge does not move mu_hat beyond
    numerical noise because delta carries no objective weight.  The ridged
    solve only identifies the working set; the returned point is re-solved
    exactly through the null space of the nuisance columns (no ridge in that
    algebra) and the KKT conditions of the un-ridged program are verified.
    """
    tol = problem.tol
    try:
        lower = cholesky_factor(problem.sigma, tol)
    except CovarianceError as exc:
        raise CovarianceError(
            f"conditional variance estimate is not positive definite (pivot {exc.pivot_index})",
            pivot_index=exc.pivot_index) from exc

    d_m, p = problem.d_m, problem.p
    inv_lower = np.linalg.inv(lower)
    eps = _DELTA_RIDGE_REL * problem.n * float(np.sum(inv_lower * inv_lower)) / d_m
    if eps <= 0.0:
        eps = _DELTA_RIDGE_REL
    delta0 = np.linalg.lstsq(problem.c_mat,
                             problem.b_mat @ problem.m_bar - problem.d,
                             rcond=None)[0]

    chol_joint = np.zeros((d_m + p, d_m + p))
    chol_joint[:d_m, :d_m] = lower / math.sqrt(problem.n)
    chol_joint[d_m:, d_m:] = np.eye(p) / math.sqrt(eps)
    spec_joint = PolyhedralSpec(np.hstack([problem.b_mat, -problem.c_mat]), problem.d)
    x0 = np.concatenate([problem.m_bar, delta0])

    lower_metric = lower / math.sqrt(problem.n)
    try:
        proj = project_polyhedron(x0, None, spec_joint, tol, chol=chol_joint)
        start_delta, start_work = proj.mu_hat[d_m:], proj.working_set
    except InfeasibleError:
        raise
    except NumericalError:
        # fall back to a cold-started polish; it is a complete active-set
        # method on its own, the ridged solve is only a warm start
        start_delta, start_work = delta0, ()
    mu_hat, delta_hat, lam = _polish_joint(problem, lower_metric,
                                           start_delta, start_work)

    w = np.linalg.solve(lower, problem.m_bar - mu_hat)
    stat = problem.n * float(w @ w)
    if stat <= tol.tol_zero_statistic:
        stat = 0.0

    _verify_joint_kkt(problem, mu_hat, delta_hat, lam, lower)
    return stat, mu_hat, delta_hat


def _null_space(mat, tol):
    """Orthonormal basis of the left null space of ``mat`` (rows x cols)."""
    if mat.shape[0] == 0:
        return np.zeros((0, 0))
    u, s, _ = np.linalg.svd(mat, full_matrices=True)
    cutoff = tol.tol_rank * max(1.0, float(s[0]) if s.size else 1.0)
    rank = int(np.sum(s > cutoff))
    return u[:, rank:]


def _joint_equality_solve(problem, lower_metric, working):
    """Exact minimizer of the moment objective on {B_W mu - C_W delta = d_W}.

    The nuisance columns are removed by an orthonormal basis U of the left
    null space of C_W, leaving a well-conditioned equality projection in mu
    alone; multipliers for the original rows are U eta, which satisfies
    C_W' lambda = 0 exactly.
    """
    m_bar = problem.m_bar
    if not working:
        return m_bar.copy(), np.zeros(0)
    rows = list(working)
    c_w = problem.c_mat[rows]
    b_w = problem.b_mat[rows]
    d_w = problem.d[rows]
    u_null = _null_space(c_w, problem.tol)
    if u_null.shape[1] == 0:
        return m_bar.copy(), np.zeros(len(rows))
    a_bar = u_null.T @ b_w
    b_bar = u_null.T @ d_w
    g = a_bar @ lower_metric
    nu0 = np.linalg.solve(lower_metric, m_bar)
    resid = g @ nu0 - b_bar
    corr = np.linalg.lstsq(g, resid, rcond=None)[0]
    nu = nu0 - corr
    eta = np.linalg.lstsq(g.T, corr, rcond=None)[0]
    mu = lower_metric @ nu
    return mu, u_null @ eta


def _repair_delta(problem, mu, delta, work):
    """Project delta onto {C delta >= B mu - d} with the working rows held at
    equality.  Returns None when that set is empty (mu is outside the
    eliminated polyhedron, so the working set must grow)."""
    rhs_all = problem.d - problem.b_mat @ mu
    rows = [-problem.c_mat]
    offs = [rhs_all]
    if work:
        rows += [problem.c_mat[work], -problem.c_mat[work]]
        offs += [-rhs_all[work], rhs_all[work]]
    spec = PolyhedralSpec(np.vstack(rows), np.concatenate(offs))
    try:
        proj = project_polyhedron(delta, np.eye(problem.p), spec, problem.tol)
    except NumericalError:
        return None
    return proj.mu_hat


def _polish_joint(problem, lower_metric, delta_start, working):
    """Active-set polish: exact solves per working set, drop negative
    multipliers, add violated rows; the ridged solve provides the start."""
    tol = problem.tol
    k = problem.k
    work = sorted(set(int(i) for i in working))
    delta = np.asarray(delta_start, dtype=float).copy()
    feas_tol = np.maximum(tol.tol_feas * (1.0 + np.abs(problem.d)), tol.tol_feas)
    for _ in range(3 * k + 10):
        mu, lam_w = _joint_equality_solve(problem, lower_metric, work)
        if len(work):
            lam_scale = 1.0 + float(np.max(np.abs(lam_w), initial=0.0))
            neg = [i for i, l in enumerate(lam_w) if l < -tol.tol_feas * lam_scale]
            if neg:
                worst = min(neg, key=lambda i: (lam_w[i], work[i]))
                work.pop(worst)
                continue
            rhs = problem.b_mat[work] @ mu - problem.d[work]
            corr = np.linalg.lstsq(problem.c_mat[work],
                                   problem.c_mat[work] @ delta - rhs, rcond=None)[0]
            delta = delta - corr
        slack = problem.c_mat @ delta - problem.b_mat @ mu + problem.d
        violated = [j for j in range(k) if slack[j] < -feas_tol[j] and j not in work]
        if violated:
            # the violation may only reflect the delta choice; try moving
            # delta alone before growing the working set
            repaired = _repair_delta(problem, mu, delta, work)
            if repaired is not None:
                delta = repaired
                slack = problem.c_mat @ delta - problem.b_mat @ mu + problem.d
                violated = [j for j in range(k)
                            if slack[j] < -feas_tol[j] and j not in work]
        if not violated:
            lam = np.zeros(k)
            for idx, row in enumerate(work):
                lam[row] = max(lam_w[idx], 0.0)
            return mu, delta, lam
        work.append(min(violated, key=lambda j: (slack[j], j)))
        work.sort()
    raise NumericalError("joint active-set polish failed to converge")


def _verify_joint_kkt(problem, mu_hat, delta_hat, lam, lower):
    """Check the KKT system of the original (un-ridged) joint program."""
    tol = problem.tol
    grad = problem.n * np.linalg.solve(
        lower.T, np.linalg.solve(lower, problem.m_bar - mu_hat))
    scale = 1.0 + float(np.linalg.norm(grad)) + float(np.linalg.norm(problem.m_bar))
    r_mu = float(np.linalg.norm(grad - problem.b_mat.T @ lam))
    r_delta = float(np.linalg.norm(problem.c_mat.T @ lam))
    slack = problem.c_mat @ delta_hat - problem.b_mat @ mu_hat + problem.d
    feas = float(np.min(slack))
    feas_scale = tol.tol_feas * (1.0 + float(np.max(np.abs(problem.d), initial=0.0)))
    comp = float(np.max(np.abs(lam * slack), initial=0.0))
    lam_scale = 1.0 + float(np.max(np.abs(lam), initial=0.0)) + float(np.max(np.abs(slack)))
    if (r_mu > tol.tol_kkt * scale or r_delta > tol.tol_kkt * scale
            or feas < -max(feas_scale, tol.tol_active)
            or comp > tol.tol_kkt * scale * lam_scale):
        raise NumericalError(
            "joint program KKT verification failed: "
            f"stationarity {r_mu:.2e}/{r_delta:.2e}, feasibility {feas:.2e}, "
            f"complementarity {comp:.2e}")


def detect_implicit_equalities(c_mat, v, tol=DEFAULT_TOLERANCES):
    """Indices j where h_j >= 0 is forced to equality on the cone.

    The cone is {h >= 0, C'h = 0, v'h = 0}; the unbounded cone is boxed with
    h <= 1, which preserves whether the per-coordinate maximum is zero.
    Returns a sorted integer array.
    """
    c = as_matrix(c_mat, "c_mat")
    k = c.shape[0]
    v = as_vector(v, "v", length=k)
    eq_rows = np.vstack([c.T, v.reshape(1, -1)])
    eq_rhs = np.zeros(eq_rows.shape[0])
    out = []
    for j in range(k):
        obj = np.zeros(k)
        obj[j] = -1.0
        res = solve_lp(obj, (eq_rows, eq_rhs), [(0.0, 1.0)] * k, tol)
        if not res.optimal:
            raise NumericalError(
                f"implicit-equality LP for coordinate {j + 1} returned {res.status}")
        if res.value >= -tol.tol_feas:
            out.append(j)
    return np.asarray(out, dtype=int)


def _active_direction(problem, mu_hat, delta_hat):
    """-s with s the joint slack, snapped to exact zeros at active rows.

    On the cone {h >= 0, C'h = 0} the linear functional h'(B mu_hat - d)
    coincides with -h's, and the snapped slack is the numerically stable
    representative (its zero pattern is exact).
    """
    slack = problem.c_mat @ delta_hat - problem.b_mat @ mu_hat + problem.d
    snap = problem.tol.tol_active * (1.0 + np.abs(problem.d))
    slack = np.where(slack <= snap, 0.0, slack)
    return -slack


def compute_rank_sub(problem, mu_hat, stat, delta_hat):
    """Degrees of freedom of the active inequalities, without elimination.

    Zero statistic short-circuits to rank zero.  Otherwise the implicit
    equalities of the cone are found by LPs, the cone's span dimension comes
    from the rank of the stacked equality system, and when B is row-rank
    deficient the span is pushed through B via the parametric form.
    """
    tol = problem.tol
    if stat <= tol.tol_zero_statistic:
        return 0
    v = _active_direction(problem, mu_hat, delta_hat)
    j_eq = detect_implicit_equalities(problem.c_mat, v, tol)
    k = problem.k
    pins = np.zeros((len(j_eq), k))
    if len(j_eq):
        pins[np.arange(len(j_eq)), j_eq] = 1.0
    stacked = np.vstack([pins, problem.c_mat.T, v.reshape(1, -1)])
    k_co = k - matrix_rank(stacked, tol)
    if matrix_rank(problem.b_mat, tol) == k:
        return k_co
    pivot_cols, free_cols, g1, _, _ = _rre_augmented(stacked, np.zeros(stacked.shape[0]), tol)
    if len(free_cols) == 0:
        return 0
    span = g1.T @ problem.b_mat[pivot_cols] + problem.b_mat[free_cols]
    return matrix_rank(span, tol)


_H_CACHE: dict[bytes, np.ndarray] = {}
_H_CACHE_LOCK = threading.Lock()


def clear_elimination_cache():
    """Drop cached vertex matrices (mainly for long sessions and tests)."""
    with _H_CACHE_LOCK:
        _H_CACHE.clear()


def eliminate_nuisance(b_mat, c_mat, d, tol=DEFAULT_TOLERANCES, budget=1_000_000,
                       cache=True):
    """Explicitly eliminate the nuisance direction via vertex enumeration.

    The vertex matrix depends only on C and is cached across repeated calls
    (for example over a parameter grid) under a lock; rows of the eliminated
    system are H @ B and H @ d.
    """
    b = as_matrix(b_mat, "b_mat")
    c = as_matrix(c_mat, "c_mat", shape=(b.shape[0], None))
    d = as_vector(d, "d", length=b.shape[0])
    key = None
    h_mat = None
    if cache:
        key = c.tobytes() + str(c.shape).encode()
        with _H_CACHE_LOCK:
            h_mat = _H_CACHE.get(key)
    if h_mat is None:
        h_mat = enumerate_vertices(c, tol, budget)
        if cache:
            with _H_CACHE_LOCK:
                _H_CACHE[key] = h_mat
    return EliminatedSystem(h_mat=h_mat, a_z=h_mat @ b, b_z=h_mat @ d)


def run_subvector_test(problem, variant=VARIANT_SRCC, budget=1_000_000):
    """Run the subvector test and return a TestOutcome.

    The refinement (variant "srcc") enumerates vertices only when the rank is
    one and the statistic falls in the window where the refined decision can
    differ; a budget overflow there is a hard error by design.
    """
    variant = str(variant).lower()
    if variant not in (VARIANT_SCC, VARIANT_SRCC):
        raise ValueError(f"variant must be 'scc' or 'srcc', got {variant!r}")
    stat, mu_hat, delta_hat = compute_statistic_sub(problem)
    rank = compute_rank_sub(problem, mu_hat, stat, delta_hat)
    alpha = problem.alpha
    cv = dist.chi2_quantile(rank, 1.0 - alpha) if rank > 0 else 0.0
    tau = None
    beta = alpha
    active = None
    if variant == VARIANT_SRCC and rank == 1:
        lo, hi = refinement_window(alpha)
        if lo <= stat <= hi:
            elim = eliminate_nuisance(problem.b_mat, problem.c_mat, problem.d,
                                      problem.tol, budget)
            if elim.empty:
                # every mu admits a nuisance value; nothing to test
                return TestOutcome(statistic=stat, mu_hat=mu_hat, active_set=None,
                                   rank=rank, tau=None, beta=alpha,
                                   critical_value=cv, reject=False,
                                   variant=variant, delta_hat=delta_hat)
            resid = np.abs(elim.a_z @ mu_hat - elim.b_z)
            active = np.flatnonzero(
                resid <= problem.tol.tol_active * (1.0 + np.abs(elim.b_z)))
            spec_z = PolyhedralSpec(elim.a_z, elim.b_z)
            tau = compute_tau(spec_z, mu_hat, problem.sigma, problem.n, active,
                              problem.tol)
            beta = compute_beta(1, tau, alpha)
            cv = dist.chi2_quantile(1, 1.0 - beta)
    return TestOutcome(statistic=stat, mu_hat=mu_hat, active_set=active,
                       rank=rank, tau=tau, beta=beta, critical_value=cv,
                       reject=bool(stat > cv), variant=variant,
                       delta_hat=delta_hat)


# ---------------------------------------------------------------------------
# Conditional variance estimators
# ---------------------------------------------------------------------------

def cond_var_discrete(data, labels):
    """Weighted average of within-category sample variances.

    Every category must occur at least twice; the offending category is named
    otherwise.
    """
    x = as_matrix(data, "data")
    labels = np.asarray(labels)
    if labels.shape[0] != x.shape[0]:
        raise ValueError("labels must have one entry per data row")
    cats, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    bad = np.flatnonzero(counts < 2)
    if len(bad):
        raise ValueError(
            f"category {cats[bad[0]]!r} occurs only {counts[bad[0]]} time(s); "
            "every category needs at least two observations")
    n, d_m = x.shape
    out = np.zeros((d_m, d_m))
    for idx in range(len(cats)):
        rows = x[inverse == idx]
        centered = rows - rows.mean(axis=0)
        out += (counts[idx] / n) * (centered.T @ centered) / (counts[idx] - 1)
    return out


def nearest_neighbor_indices(z, seed=0, tol=DEFAULT_TOLERANCES):
    """Index of each row's Mahalanobis-nearest other row, ties broken at random."""
    z = as_matrix(z, "z")
    n = z.shape[0]
    if n < 2:
        raise ValueError("nearest-neighbor matching needs n >= 2")
    sigma_z = sample_cov_divisor_n(z)
    try:
        lower = cholesky_factor(sigma_z, tol)
    except CovarianceError as exc:
        raise CovarianceError(
            "the conditioning variables have a singular covariance matrix; "
            "consider adding a tiny continuous jitter",
            pivot_index=exc.pivot_index) from exc
    rng = np.random.default_rng(seed)
    white = np.linalg.solve(lower, z.T).T

    _, inverse, counts = np.unique(white, axis=0, return_inverse=True,
                                   return_counts=True)
    if np.all(counts[inverse] >= 2):
        # duplicate rows everywhere: the nearest neighbor is a random other
        # member of the same cell (distance exactly zero)
        neighbors = np.empty(n, dtype=int)
        for cell in range(len(counts)):
            members = np.flatnonzero(inverse == cell)
            for i in members:
                cand = members[int(rng.integers(len(members) - 1))]
                neighbors[i] = cand if cand != i else members[-1]
        return neighbors

    sq = np.sum(white * white, axis=1)
    dist_sq = sq[:, None] + sq[None, :] - 2.0 * (white @ white.T)
    np.fill_diagonal(dist_sq, np.inf)
    dist_sq = np.maximum(dist_sq, 0.0)
    row_min = dist_sq.min(axis=1)
    tie_cut = row_min + 1e-9 * (1.0 + row_min)
    neighbors = np.empty(n, dtype=int)
    for i in range(n):
        ties = np.flatnonzero(dist_sq[i] <= tie_cut[i])
        neighbors[i] = ties[0] if len(ties) == 1 else rng.choice(ties)
    return neighbors


def sample_cov_divisor_n(x):
    x = as_matrix(x, "x")
    centered = x - x.mean(axis=0)
    return centered.T @ centered / x.shape[0]


def matched_variance(data, neighbors):
    """Half-averaged outer products of row differences against matched rows."""
    x = as_matrix(data, "data")
    diff = x - x[np.asarray(neighbors, dtype=int)]
    return diff.T @ diff / (2.0 * x.shape[0])


def cond_var_nearest_neighbor(data, z, seed=0, tol=DEFAULT_TOLERANCES):
    """Nearest-neighbor matching estimator of the average conditional variance.

    Each observation is paired with its Mahalanobis-nearest other observation
    in Z space (metric from the divisor-n covariance of Z, ties broken
    uniformly at random with the given seed) and the half-averaged outer
    products of the paired differences are returned.
    """
    x = as_matrix(data, "data")
    z = as_matrix(z, "z")
    if z.shape[0] != x.shape[0]:
        raise ValueError("data and z must have the same number of rows")
    return matched_variance(x, nearest_neighbor_indices(z, seed, tol))
