"""Confidence sets by test inversion, projection-test baselines, and the
identified-set computation for the interval-regression design."""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import intervalreg
from ._validation import as_matrix, check_alpha
from .errors import NumericalError
from .fullvector import FullVectorProblem, TestOutcome, run_test, sample_variance
from .linalg import DEFAULT_TOLERANCES, PolyhedralSpec
from .subvector import SubvectorProblem, cond_var_nearest_neighbor, run_subvector_test


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid: explicit points, or per-parameter linspace bounds."""

    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    count: tuple[int, ...] | None = None
    points: tuple | None = None

    def __post_init__(self):
        if self.points is not None:
            pts = [tuple(np.atleast_1d(np.asarray(p, dtype=float))) for p in self.points]
            if not pts:
                raise ValueError("grid needs at least one point")
            object.__setattr__(self, "points", tuple(pts))
            return
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        ct = tuple(int(v) for v in np.atleast_1d(self.count))
        if not len(lo) == len(hi) == len(ct):
            raise ValueError("lower, upper and count must have equal lengths")
        if any(l > u for l, u in zip(lo, hi)) or any(c < 1 for c in ct):
            raise ValueError("need lower <= upper and count >= 1 per parameter")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "count", ct)

    def grid_points(self):
        """All points in deterministic (C-order) sequence, as tuples."""
        if self.points is not None:
            return list(self.points)
        axes = [np.linspace(l, u, c) for l, u, c in zip(self.lower, self.upper, self.count)]
        mesh = np.meshgrid(*axes, indexing="ij")
        stacked = np.stack([m.ravel() for m in mesh], axis=-1)
        return [tuple(row) for row in stacked]


@dataclass
class ConfidenceSetReport:
    thetas: list
    outcomes: list            # TestOutcome or None for indeterminate points
    errors: dict              # index -> message
    alpha: float
    variant: str

    @property
    def retained(self):
        return [t for t, o in zip(self.thetas, self.outcomes)
                if o is not None and not o.reject]

    def to_rows(self):
        rows = []
        for idx, (theta, out) in enumerate(zip(self.thetas, self.outcomes)):
            base = {f"theta_{i + 1}": v for i, v in enumerate(theta)}
            if out is None:
                rows.append({**base, "statistic": "", "r_hat": "", "beta_hat": "",
                             "critical_value": "", "reject": "",
                             "status": f"error: {self.errors.get(idx, '')}"})
            else:
                rows.append({**base, "statistic": out.statistic, "r_hat": out.rank,
                             "beta_hat": out.beta, "critical_value": out.critical_value,
                             "reject": int(out.reject), "status": "ok"})
        return rows

    def to_csv(self, path):
        rows = self.to_rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)

    def summary(self):
        return {
            "alpha": self.alpha,
            "variant": self.variant,
            "n_points": len(self.thetas),
            "n_retained": len(self.retained),
            "n_indeterminate": len(self.errors),
            "retained": [list(t) for t in self.retained],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _run_variant(problem, variant):
    if isinstance(problem, SubvectorProblem):
        return run_subvector_test(problem, variant)
    if isinstance(problem, FullVectorProblem):
        return run_test(problem, variant)
    raise TypeError(f"unsupported problem type {type(problem).__name__}")


def invert_test(problem_factory, grid, variant="rcc", alpha=0.05, threads=1):
    """Evaluate the test at every grid point and keep the accepted ones.

    ``problem_factory`` maps a parameter tuple (scalars are unpacked for
    one-parameter grids) to a problem value.  Per-point numerical failures
    are recorded and the point marked indeterminate; the run continues.
    """
    alpha = check_alpha(alpha)
    points = grid.grid_points() if isinstance(grid, GridSpec) else GridSpec(points=grid).grid_points()

    def evaluate(theta):
        arg = theta[0] if len(theta) == 1 else theta
        problem = problem_factory(arg)
        return _run_variant(problem, variant)

    outcomes: list = [None] * len(points)
    errors: dict = {}
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {idx: pool.submit(evaluate, theta)
                       for idx, theta in enumerate(points)}
        for idx in range(len(points)):
            try:
                outcomes[idx] = futures[idx].result()
            except (ValueError, NumericalError) as exc:
                errors[idx] = str(exc)
    else:
        for idx, theta in enumerate(points):
            try:
                outcomes[idx] = evaluate(theta)
            except (ValueError, NumericalError) as exc:
                errors[idx] = str(exc)
    return ConfidenceSetReport(thetas=points, outcomes=outcomes, errors=errors,
                               alpha=alpha, variant=variant)


# ---------------------------------------------------------------------------
# Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5)
# ---------------------------------------------------------------------------

def nelder_mead(func, x0, step=0.5, diameter_tol=1e-6, max_iter=None,
                stop_below=None):
    """Minimize ``func`` from ``x0``; returns (x, f, converged, stopped_early).

    Converges when the simplex diameter (max vertex distance to the best
    vertex) drops below ``diameter_tol``; ``stop_below`` allows early exit as
    soon as any evaluation reaches that value.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.shape[0]
    if dim == 0:
        f0 = float(func(x0))
        return x0, f0, True, stop_below is not None and f0 <= stop_below
    if max_iter is None:
        max_iter = 400 * dim

    early = [False]

    def wrapped(x):
        val = float(func(x))
        if stop_below is not None and val <= stop_below:
            early[0] = True
        return val

    simplex = [x0.copy()]
    for i in range(dim):
        vertex = x0.copy()
        vertex[i] += step
        simplex.append(vertex)
    values = []
    for vertex in simplex:
        values.append(wrapped(vertex))
        if early[0]:
            best = int(np.argmin(values))
            return simplex[best], values[best], False, True
    simplex = np.asarray(simplex)
    values = np.asarray(values)

    for _ in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if float(np.max(np.abs(simplex[1:] - simplex[0]))) < diameter_tol:
            return simplex[0], values[0], True, False
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        reflected = centroid + (centroid - worst)
        f_r = wrapped(reflected)
        if early[0]:
            return reflected, f_r, False, True
        if f_r < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_e = wrapped(expanded)
            if early[0]:
                return expanded, f_e, False, True
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[-1]:
            contracted = centroid + 0.5 * (reflected - centroid)
        else:
            contracted = centroid + 0.5 * (worst - centroid)
        f_c = wrapped(contracted)
        if early[0]:
            return contracted, f_c, False, True
        if f_c < min(f_r, values[-1]):
            simplex[-1], values[-1] = contracted, f_c
            continue
        # shrink toward the best vertex
        for i in range(1, dim + 1):
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            values[i] = wrapped(simplex[i])
            if early[0]:
                best = int(np.argmin(values))
                return simplex[best], values[best], False, True
    best = int(np.argmin(values))
    return simplex[best], values[best], False, False


# ---------------------------------------------------------------------------
# Projection-based baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionData:
    """Per-observation inputs for the projected full-vector test.

    ``m_rows`` holds the moments at the tested parameter, ``loadings`` the
    per-observation nuisance coefficient stacks (n x k x p), ``z_c`` the
    covariates used for the least-squares initializer (with ``psi_mid`` as
    its target), and ``z`` the conditioning variables for the matched
    variance estimator.
    """

    m_rows: np.ndarray
    loadings: np.ndarray
    z_c: np.ndarray
    psi_mid: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if self.loadings.ndim != 3 or self.loadings.shape[:2] != self.m_rows.shape:
            raise ValueError("loadings must have shape (n, k, p)")
        if self.p and self.z_c.shape[1] != self.p:
            raise ValueError("z_c must have one column per nuisance coordinate")

    @property
    def p(self):
        return self.loadings.shape[2]


VARIANT_PROJ_U = "proj-u"
VARIANT_PROJ_C = "proj-c"


def projection_test(data, variant=VARIANT_PROJ_U, alpha=0.05, starts=5, seed=0,
                    tol=DEFAULT_TOLERANCES):
    """1{inf_delta [T(delta) - cv(delta)] > 0} via multi-start local search.

    The first start is the least-squares coefficient of psi_mid on z_c; the
    remaining ones are drawn from a unit normal around it.  A start whose
    local minimum is nonpositive accepts immediately; an unconverged search
    counts as inconclusive-high (cannot force acceptance).  Returns
    (reject, diagnostics).
    """
    variant = str(variant).lower()
    if variant not in (VARIANT_PROJ_U, VARIANT_PROJ_C):
        raise ValueError(f"variant must be 'proj-u' or 'proj-c', got {variant!r}")
    alpha = check_alpha(alpha)
    m_rows = as_matrix(data.m_rows, "m_rows")
    n, k = m_rows.shape
    spec = PolyhedralSpec(np.eye(k), np.zeros(k))

    sigma_cond = None
    if variant == VARIANT_PROJ_C:
        sigma_cond = cond_var_nearest_neighbor(m_rows, data.z, seed=seed, tol=tol)

    evals = [0]

    def objective(delta):
        evals[0] += 1
        rows = m_rows - data.loadings @ delta if data.p else m_rows
        sigma = sigma_cond if sigma_cond is not None else sample_variance(rows)
        try:
            problem = FullVectorProblem(m_bar=rows.mean(axis=0), sigma=sigma,
                                        n=n, spec=spec, alpha=alpha, tol=tol)
            out = run_test(problem, "rcc")
        except NumericalError:
            return math.inf
        return out.statistic - out.critical_value

    if data.p == 0:
        value = objective(np.zeros(0))
        return bool(value > 0), {"starts": 1, "evaluations": evals[0],
                                 "minima": [value], "unconverged": 0}

    delta_init = np.linalg.lstsq(data.z_c, data.psi_mid, rcond=None)[0]
    rng = np.random.default_rng(seed)
    minima = []
    unconverged = 0
    for s in range(max(int(starts), 1)):
        start = delta_init if s == 0 else delta_init + rng.standard_normal(data.p)
        x, val, converged, stopped = nelder_mead(objective, start,
                                                 stop_below=0.0)
        if stopped or val <= 0.0:
            minima.append(val)
            return False, {"starts": s + 1, "evaluations": evals[0],
                           "minima": minima, "unconverged": unconverged}
        if not converged:
            unconverged += 1
        minima.append(val)
    return True, {"starts": len(minima), "evaluations": evals[0],
                  "minima": minima, "unconverged": unconverged}


def identified_set_interval_regression(design, draws=1_000_000, seed=0,
                                       tol=DEFAULT_TOLERANCES):
    """Endpoints of the identified interval in the interval-regression design."""
    return intervalreg.identified_set(design, draws=draws, seed=seed, tol=tol)
