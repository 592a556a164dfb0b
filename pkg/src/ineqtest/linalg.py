"""Dense polyhedral computation primitives.

Everything in here is a pure function of its inputs: a bounded-variable
primal simplex with Bland's anti-cycling rule, projection onto a polyhedron
in a positive-definite metric (Cholesky whitening followed by a dual
active-set iteration), numerical rank and Gauss-Jordan reduction, and
combinatorial vertex enumeration for the small polytopes arising in
nuisance-parameter elimination.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix, as_vector, check_symmetric
from .errors import (
    BudgetExceededError,
    CovarianceError,
    DegeneratePivotError,
    InfeasibleError,
    NumericalError,
)


@dataclass(frozen=True)
class Tolerances:
    """Numerical knobs; the defaults suit double precision at modest condition."""

    tol_feas: float = 1e-9
    tol_active: float = 1e-7
    tol_rank: float = 1e-9
    tol_kkt: float = 1e-7
    tol_vertex_dedupe: float = 1e-8
    tol_zero_statistic: float = 1e-10

    def __post_init__(self):
        for name in ("tol_feas", "tol_active", "tol_rank", "tol_kkt",
                     "tol_vertex_dedupe", "tol_zero_statistic"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class PolyhedralSpec:
    """The polyhedron {mu : a_mat @ mu <= b}."""

    a_mat: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a_mat, "a_mat")
        b = as_vector(self.b, "b")
        if a.shape[0] != b.shape[0]:
            raise ValueError(
                f"a_mat has {a.shape[0]} rows but b has length {b.shape[0]}")
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "b", b)

    @property
    def n_rows(self):
        return self.a_mat.shape[0]

    @property
    def n_cols(self):
        return self.a_mat.shape[1]


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None
    x: np.ndarray | None
    basis: tuple[int, ...]

    @property
    def optimal(self):
        return self.status == "optimal"


@dataclass(frozen=True)
class ProjectionResult:
    mu_hat: np.ndarray
    distance_sq: float
    active_set: np.ndarray
    multipliers: np.ndarray
    working_set: tuple[int, ...] = field(default=())


def cholesky_factor(sigma, tol=DEFAULT_TOLERANCES):
    """Lower-triangular L with L @ L.T = sigma.

    A pivot must exceed tol_rank * trace(sigma) / d; the first failing pivot
    index (1-based) is attached to the raised CovarianceError.
    """
    s = check_symmetric(sigma, "sigma")
    d = s.shape[0]
    threshold = tol.tol_rank * max(float(np.trace(s)), 0.0) / max(d, 1)
    lower = np.zeros_like(s)
    for j in range(d):
        pivot = s[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= threshold:
            raise CovarianceError(
                f"matrix is not positive definite (pivot {j + 1} = {pivot:.3e})",
                pivot_index=j + 1)
        lower[j, j] = math.sqrt(pivot)
        if j + 1 < d:
            lower[j + 1:, j] = (s[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def matrix_rank(m, tol=DEFAULT_TOLERANCES):
    """Rank by Gaussian elimination with partial pivoting.

    A pivot counts iff its magnitude exceeds tol_rank * max(1, ||m||_inf).
    """
    a = np.array(as_matrix(m, "matrix"), dtype=float) if np.size(m) else None
    if a is None or a.size == 0:
        return 0
    threshold = tol.tol_rank * max(1.0, float(np.max(np.sum(np.abs(a), axis=1))))
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        sub = np.abs(a[rank:, col])
        piv = int(np.argmax(sub))
        if sub[piv] <= threshold:
            continue
        piv += rank
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        a[rank + 1:, col:] -= np.outer(a[rank + 1:, col] / a[rank, col], a[rank, col:])
        rank += 1
    return rank


def _rre_augmented(e_mat, rhs, tol=DEFAULT_TOLERANCES):
    """Gauss-Jordan reduction of [E | rhs].

    Returns (pivot_cols, free_cols, g1, g0, consistent) such that
    E @ h = rhs  <=>  h[pivot_cols] = g1 @ h[free_cols] + g0,
    with the leftmost admissible column and the largest-magnitude row pivot
    chosen at every step (deterministic).
    """
    e = np.array(as_matrix(e_mat, "e_mat"), dtype=float) if np.size(e_mat) else np.zeros((0, 0))
    if e.size == 0 and np.ndim(e_mat) == 2:
        e = np.zeros(np.shape(e_mat))
    rows, cols = e.shape
    r = as_vector(rhs, "rhs", length=rows) if rows else np.zeros(0)
    aug = np.hstack([e, r.reshape(-1, 1)]) if rows else np.zeros((0, cols + 1))
    threshold = tol.tol_rank * max(1.0, float(np.max(np.sum(np.abs(aug), axis=1))) if rows else 1.0)
    pivot_cols = []
    row = 0
    for col in range(cols):
        if row == rows:
            break
        sub = np.abs(aug[row:, col])
        piv = int(np.argmax(sub))
        if sub[piv] <= threshold:
            continue
        piv += row
        if piv != row:
            aug[[row, piv]] = aug[[piv, row]]
        aug[row] /= aug[row, col]
        others = np.arange(rows) != row
        aug[others] -= np.outer(aug[others, col], aug[row])
        pivot_cols.append(col)
        row += 1
    consistent = True
    if row < rows:
        consistent = bool(np.max(np.abs(aug[row:, -1]), initial=0.0) <= threshold)
    pivot_cols = np.array(pivot_cols, dtype=int)
    free_cols = np.array([c for c in range(cols) if c not in set(pivot_cols.tolist())], dtype=int)
    g1 = -aug[:len(pivot_cols), :][:, free_cols] if len(pivot_cols) else np.zeros((0, len(free_cols)))
    g0 = aug[:len(pivot_cols), -1] if len(pivot_cols) else np.zeros(0)
    return pivot_cols, free_cols, g1, g0, consistent


def reduced_row_echelon(e_mat, tol=DEFAULT_TOLERANCES):
    """Partition variables of E @ h = 0 into pivot (non-core) and free (core).

    Returns (pivot_cols, free_cols, g1) with h[pivot_cols] = g1 @ h[free_cols].
    """
    e = as_matrix(e_mat, "e_mat") if np.size(e_mat) else np.asarray(e_mat, dtype=float)
    rows = e.shape[0] if e.ndim == 2 else 0
    pivot_cols, free_cols, g1, _, _ = _rre_augmented(e, np.zeros(rows), tol)
    return pivot_cols, free_cols, g1


# ---------------------------------------------------------------------------
# Linear programming: bounded-variable primal simplex, Bland's rule
# ---------------------------------------------------------------------------

_BASIC, _AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2, 3


def _simplex_core(a_mat, cost, lower, upper, basis, x, status, tol_cost, tol_piv, max_iter):
    """Run the bounded-variable simplex to optimality on a started basis.

    Mutates basis/x/status in place. Returns "optimal" or "unbounded".
    Entering and leaving choices use Bland's smallest-index rule throughout.
    """
    m = a_mat.shape[0]
    for _ in range(max_iter):
        bmat = a_mat[:, basis]
        try:
            y = np.linalg.solve(bmat.T, cost[basis]) if m else np.zeros(0)
        except np.linalg.LinAlgError:
            raise DegeneratePivotError(
                "singular simplex basis", diagnostics={"basis": list(basis)})
        reduced = cost - y @ a_mat if m else cost.copy()

        entering, direction = -1, 0
        for j in range(a_mat.shape[1]):
            st = status[j]
            if st == _BASIC:
                continue
            if st in (_AT_LOWER, _FREE) and reduced[j] < -tol_cost:
                entering, direction = j, 1
                break
            if st in (_AT_UPPER, _FREE) and reduced[j] > tol_cost:
                entering, direction = j, -1
                break
        if entering < 0:
            return "optimal"

        w = np.linalg.solve(bmat, a_mat[:, entering]) if m else np.zeros(0)
        # ратio test: smallest step; ties resolved by smallest variable index
        best_t = math.inf
        best_var = -1          # variable that blocks (entering itself => bound flip)
        best_pos = -1
        if direction > 0 and np.isfinite(upper[entering]):
            best_t = upper[entering] - x[entering]
            best_var = entering
        elif direction < 0 and np.isfinite(lower[entering]):
            best_t = x[entering] - lower[entering]
            best_var = entering
        for i in range(m):
            delta = -direction * w[i]
            v = basis[i]
            if delta > tol_piv and np.isfinite(upper[v]):
                t = (upper[v] - x[v]) / delta
            elif delta < -tol_piv and np.isfinite(lower[v]):
                t = (x[v] - lower[v]) / (-delta)
            else:
                continue
            t = max(t, 0.0)
            if t < best_t - 1e-13 or (abs(t - best_t) <= 1e-13 and v < best_var):
                best_t, best_var, best_pos = t, v, i
        if not math.isfinite(best_t):
            return "unbounded"

        x[entering] += direction * best_t
        if m:
            x[basis] -= direction * best_t * w
        if best_var == entering and best_pos < 0:
            status[entering] = _AT_UPPER if direction > 0 else _AT_LOWER
        else:
            leaving = basis[best_pos]
            delta = -direction * w[best_pos]
            status[leaving] = _AT_UPPER if delta > 0 else _AT_LOWER
            x[leaving] = upper[leaving] if delta > 0 else lower[leaving]
            basis[best_pos] = entering
            status[entering] = _BASIC
    raise DegeneratePivotError(
        "simplex iteration limit exceeded",
        diagnostics={"max_iter": max_iter})


def solve_lp(objective, eq, bounds, tol=DEFAULT_TOLERANCES):
    """Minimize objective @ x subject to eq[0] @ x = eq[1] and bounds.

    ``bounds`` is a sequence of (lo, hi) pairs; use +-inf for one-sided or
    free variables.  Deterministic: identical inputs give identical results.
    """
    c = as_vector(objective, "objective")
    n = c.shape[0]
    a_eq, b_eq = eq
    a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n) if np.size(a_eq) else np.zeros((0, n))
    if not np.all(np.isfinite(a_eq)):
        raise ValueError("equality matrix must have finite entries")
    m = a_eq.shape[0]
    b_eq = as_vector(b_eq, "b_eq", length=m) if m else np.zeros(0)
    lo = np.array([float(b[0]) for b in bounds])
    hi = np.array([float(b[1]) for b in bounds])
    if lo.shape[0] != n:
        raise ValueError(f"expected {n} bound pairs, got {lo.shape[0]}")
    if np.any(lo > hi):
        raise ValueError("every bound must satisfy lo <= hi")

    n_tot = n + m
    a_full = np.hstack([a_eq, np.zeros((m, m))])
    lower = np.concatenate([lo, np.zeros(m)])
    upper = np.concatenate([hi, np.full(m, math.inf)])

    x = np.zeros(n_tot)
    status = np.full(n_tot, _AT_LOWER, dtype=int)
    for j in range(n):
        if np.isfinite(lo[j]):
            x[j], status[j] = lo[j], _AT_LOWER
        elif np.isfinite(hi[j]):
            x[j], status[j] = hi[j], _AT_UPPER
        else:
            x[j], status[j] = 0.0, _FREE

    resid = b_eq - a_eq @ x[:n] if m else np.zeros(0)
    for i in range(m):
        a_full[i, n + i] = 1.0 if resid[i] >= 0 else -1.0
        x[n + i] = abs(resid[i])
        status[n + i] = _BASIC
    basis = list(range(n, n_tot))

    tol_cost = 1e-9
    tol_piv = 1e-11
    max_iter = 5000 + 200 * n_tot

    if m:
        phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
        state = _simplex_core(a_full, phase1_cost, lower, upper, basis, x, status,
                              tol_cost, tol_piv, max_iter)
        art_value = float(np.sum(x[n:]))
        if state != "optimal" or art_value > tol.tol_feas * (1.0 + float(np.max(np.abs(b_eq), initial=0.0))):
            return LpResult(status="infeasible", value=None, x=None, basis=())
        upper[n:] = 0.0  # pin artificials for phase 2
        x[n:] = np.maximum(x[n:], 0.0)

    cost = np.concatenate([c, np.zeros(m)])
    state = _simplex_core(a_full, cost, lower, upper, basis, x, status,
                          tol_cost * (1.0 + float(np.max(np.abs(c), initial=0.0))),
                          tol_piv, max_iter)
    if state == "unbounded":
        return LpResult(status="unbounded", value=None, x=None, basis=())

    sol = x[:n].copy()
    sol = np.minimum(np.maximum(sol, np.where(np.isfinite(lo), lo, sol)),
                     np.where(np.isfinite(hi), hi, sol))
    if m:
        feas_scale = tol.tol_feas * (1.0 + float(np.max(np.abs(b_eq), initial=0.0)))
        gap = float(np.max(np.abs(a_eq @ sol - b_eq), initial=0.0))
        if gap > max(feas_scale, 1e-7 * (1.0 + float(np.max(np.abs(sol))))):
            raise DegeneratePivotError(
                "simplex returned an infeasible optimum",
                diagnostics={"equality_gap": gap})
    struct_basis = tuple(sorted(v for v in basis if v < n))
    return LpResult(status="optimal", value=float(c @ sol), x=sol, basis=struct_basis)


# ---------------------------------------------------------------------------
# Projection onto a polyhedron in the metric induced by a PD matrix
# ---------------------------------------------------------------------------

def _dual_active_set(u, g_mat, b, tol):
    """Euclidean projection of u onto {v : g_mat @ v <= b}.

    Dual active-set iteration (Goldfarb-Idnani flavored, Hessian = I): start
    at the unconstrained optimum, repeatedly add the most violated constraint,
    taking partial dual steps that drop constraints whose multipliers would
    turn negative.  Returns (v, multipliers, working_set).
    """
    n_rows = g_mat.shape[0]
    v = u.copy()
    working: list[int] = []
    lam: list[float] = []
    row_norm = np.maximum(np.linalg.norm(g_mat, axis=1), 1e-30) if n_rows else np.zeros(0)
    max_outer = 50 * (n_rows + u.shape[0] + 5)

    for _ in range(max_outer):
        # violations below the float noise floor of g_j @ v are unresolvable
        noise = 64.0 * np.finfo(float).eps * row_norm * (1.0 + float(np.linalg.norm(v)))
        feas_scale = np.maximum(tol.tol_feas * (1.0 + np.abs(b)), noise)
        slack = g_mat @ v - b if n_rows else np.zeros(0)
        scaled = slack / (1.0 + np.abs(b)) if n_rows else np.zeros(0)
        q = int(np.argmax(scaled)) if n_rows else -1
        if q < 0 or slack[q] <= feas_scale[q]:
            mult = np.zeros(n_rows)
            for idx, j in enumerate(working):
                mult[j] = max(lam[idx], 0.0)
            return v, mult, tuple(working)

        g_q = g_mat[q]
        lam_q = 0.0
        for _ in range(n_rows + u.shape[0] + 5):
            if working:
                n_active = g_mat[working].T
                q_fac, r_fac = np.linalg.qr(n_active)
                rhs = q_fac.T @ g_q
                try:
                    r_coef = np.linalg.solve(r_fac, rhs)
                except np.linalg.LinAlgError:
                    raise NumericalError("degenerate working set in projection")
                z = g_q - n_active @ r_coef
            else:
                r_coef = np.zeros(0)
                z = g_q.copy()

            z_sq = float(z @ z)
            s_q = float(g_q @ v - b[q])
            movable = z_sq > (tol.tol_rank * max(1.0, row_norm[q])) ** 2

            t_dual = math.inf
            blocker = -1
            for idx in range(len(working)):
                if r_coef[idx] > 1e-12:
                    t = lam[idx] / r_coef[idx]
                    if t < t_dual - 1e-15 or (abs(t - t_dual) <= 1e-15
                                              and (blocker < 0 or working[idx] < working[blocker])):
                        t_dual, blocker = t, idx
            if movable:
                t_primal = s_q / z_sq
                t = min(t_primal, t_dual)
                v -= t * z
                for idx in range(len(working)):
                    lam[idx] -= t * r_coef[idx]
                lam_q += t
                if t_primal <= t_dual:
                    working.append(q)
                    lam.append(lam_q)
                    break
                working.pop(blocker)
                lam.pop(blocker)
            else:
                if not math.isfinite(t_dual):
                    raise InfeasibleError(
                        f"constraint {q + 1} cannot be satisfied: polyhedron is empty")
                for idx in range(len(working)):
                    lam[idx] -= t_dual * r_coef[idx]
                lam_q += t_dual
                working.pop(blocker)
                lam.pop(blocker)
        else:
            raise NumericalError("projection inner loop failed to converge")
    raise NumericalError("projection outer loop failed to converge")


def _check_polyhedron_feasible(spec, tol):
    """Phase-1 LP: is {mu : A mu <= b} nonempty?"""
    d_a, d_m = spec.a_mat.shape
    # variables: mu (free), w >= 0 slack, t >= 0 violation; A mu + w - t = b
    n = d_m + 2 * d_a
    a_eq = np.hstack([spec.a_mat, np.eye(d_a), -np.eye(d_a)])
    c = np.concatenate([np.zeros(d_m + d_a), np.ones(d_a)])
    bounds = [(-math.inf, math.inf)] * d_m + [(0.0, math.inf)] * (2 * d_a)
    res = solve_lp(c, (a_eq, spec.b), bounds, tol)
    return res.optimal and res.value <= tol.tol_feas * (1.0 + float(np.max(np.abs(spec.b), initial=0.0)))


def project_polyhedron(x, sigma, spec, tol=DEFAULT_TOLERANCES, chol=None):
    """Projection of x onto {mu : A mu <= b} in the metric sigma^{-1}.

    Minimizes (x - mu)' sigma^{-1} (x - mu); sigma must be symmetric positive
    definite.  Returns the minimizer, the minimum, the active set
    {j : |a_j' mu - b_j| <= tol_active (1 + |b_j|)} and the KKT multipliers.
    ``chol`` may carry a precomputed Cholesky factor of sigma.
    """
    x = as_vector(x, "x")
    lower = chol if chol is not None else cholesky_factor(sigma, tol)
    if spec.n_cols != x.shape[0]:
        raise ValueError(
            f"spec has {spec.n_cols} columns but point has dimension {x.shape[0]}")
    if spec.n_rows == 0:
        return ProjectionResult(mu_hat=x.copy(), distance_sq=0.0,
                                active_set=np.zeros(0, dtype=int),
                                multipliers=np.zeros(0))

    u = np.linalg.solve(lower, x)
    g_mat = spec.a_mat @ lower
    try:
        v, lam, working = _dual_active_set(u, g_mat, spec.b, tol)
    except NumericalError as exc:
        if not _check_polyhedron_feasible(spec, tol):
            raise InfeasibleError("projection target polyhedron is empty") from exc
        if isinstance(exc, InfeasibleError):
            raise NumericalError(
                "projection produced an infeasibility certificate on a feasible "
                "polyhedron (conditioning)") from exc
        raise

    mu_hat = lower @ v
    diff = u - v
    dist_sq = max(float(diff @ diff), 0.0)
    resid = np.abs(spec.a_mat @ mu_hat - spec.b)
    active = np.flatnonzero(resid <= tol.tol_active * (1.0 + np.abs(spec.b)))
    return ProjectionResult(mu_hat=mu_hat, distance_sq=dist_sq,
                            active_set=active, multipliers=lam,
                            working_set=working)


# ---------------------------------------------------------------------------
# Vertex enumeration for {h >= 0, C'h = 0, 1'h = 1}
# ---------------------------------------------------------------------------

def enumerate_vertices(c_mat, tol=DEFAULT_TOLERANCES, budget=1_000_000):
    """All vertices of {h in R^k : h >= 0, C'h = 0, 1'h = 1}, one per row.

    The polytope is reduced to a full-dimensional one by removing implicit
    equalities (found by per-coordinate LPs) and solving the equality system
    in parametric form; vertices are then enumerated combinatorially over
    square subsystems of the remaining inequality rows.  Returns an empty
    (0, k) array when the polytope is empty.  Raises BudgetExceededError if
    the number of candidate bases exceeds ``budget``.
    """
    c = np.asarray(c_mat, dtype=float)
    if c.ndim == 1:
        c = c.reshape(-1, 1)
    k = c.shape[0]
    p = c.shape[1]
    empty = np.zeros((0, k))
    if k == 0:
        return empty

    eq_rows = np.vstack([c.T, np.ones((1, k))])
    eq_rhs = np.concatenate([np.zeros(p), [1.0]])

    # cheap a-priori budget guard before solving any LPs
    dim_bound = k - matrix_rank(eq_rows, tol)
    bound_candidates = math.comb(k, dim_bound) if dim_bound <= k else 0
    if bound_candidates > budget:
        raise BudgetExceededError(
            f"vertex enumeration would try about {bound_candidates} candidate "
            f"bases (budget {budget}); only the refinement step requires "
            "enumeration, raise the budget to force it")

    implied = []
    for j in range(k):
        obj = np.zeros(k)
        obj[j] = -1.0
        res = solve_lp(obj, (eq_rows, eq_rhs), [(0.0, 1.0)] * k, tol)
        if res.status == "infeasible":
            return empty
        if res.status != "optimal":
            raise NumericalError(f"implicit-equality LP {j} returned {res.status}")
        if res.value >= -tol.tol_feas:
            implied.append(j)

    e_mat = eq_rows
    rhs = eq_rhs
    if implied:
        pins = np.zeros((len(implied), k))
        pins[np.arange(len(implied)), implied] = 1.0
        e_mat = np.vstack([e_mat, pins])
        rhs = np.concatenate([rhs, np.zeros(len(implied))])

    pivot_cols, free_cols, g1, g0, consistent = _rre_augmented(e_mat, rhs, tol)
    if not consistent:
        return empty

    def embed(y):
        h = np.zeros(k)
        h[free_cols] = y
        h[pivot_cols] = g1 @ y + g0 if len(pivot_cols) else np.zeros(0)
        return h

    dim = len(free_cols)
    if dim == 0:
        h = embed(np.zeros(0))
        if np.min(h, initial=0.0) >= -tol.tol_feas:
            return h.reshape(1, k)
        return empty

    # inequality rows over the reduced coordinates: h_j >= 0 for every j
    rows = []
    rhs_rows = []
    pivot_pos = {int(cval): i for i, cval in enumerate(pivot_cols)}
    for j in range(k):
        if j in pivot_pos:
            grad = g1[pivot_pos[j]]
            offset = -g0[pivot_pos[j]]
        else:
            grad = np.zeros(dim)
            grad[int(np.flatnonzero(free_cols == j)[0])] = 1.0
            offset = 0.0
        if np.max(np.abs(grad), initial=0.0) <= tol.tol_rank:
            if offset > tol.tol_feas:
                return empty
            continue
        rows.append(grad)
        rhs_rows.append(offset)
    m_mat = np.asarray(rows)
    q_vec = np.asarray(rhs_rows)

    n_candidates = math.comb(m_mat.shape[0], dim) if m_mat.shape[0] >= dim else 0
    if n_candidates > budget:
        raise BudgetExceededError(
            f"vertex enumeration needs {n_candidates} candidate bases "
            f"(budget {budget}); only the refinement step requires enumeration")

    feas_tol = tol.tol_feas * (1.0 + np.abs(q_vec))
    vertices: list[np.ndarray] = []
    for subset in itertools.combinations(range(m_mat.shape[0]), dim):
        sub = m_mat[list(subset)]
        try:
            y = np.linalg.solve(sub, q_vec[list(subset)])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(y)):
            continue
        if np.max(np.abs(sub @ y - q_vec[list(subset)]), initial=0.0) > 1e-8 * (1.0 + float(np.max(np.abs(y)))):
            continue
        resid = m_mat @ y - q_vec
        if np.any(resid < -feas_tol):
            continue
        # a near-singular basis can land on the interior of a face (small
        # residual, but not a vertex): require the active rows to span
        active = m_mat[np.abs(resid) <= np.maximum(feas_tol, 1e-8 * (1.0 + np.abs(q_vec)))]
        if matrix_rank(active, tol) < dim:
            continue
        h = embed(y)
        if np.min(h) < -tol.tol_feas:
            continue
        is_new = True
        for seen in vertices:
            if float(np.max(np.abs(seen - h))) <= tol.tol_vertex_dedupe:
                is_new = False
                break
        if is_new:
            vertices.append(h)
    if not vertices:
        return empty
    return np.vstack(vertices)
