"""Monte Carlo studies: the Gaussian full-vector design and the
interval-regression subvector design, with size/power aggregation.

Reproducibility contract: a report is a pure function of (design, variant,
options); random streams are counter-based (Philox) and keyed by the master
seed together with the point or replication index, so reductions are
order-independent and rerunning with the same seed reproduces every number
bit for bit (wall-clock timings are kept out of the file outputs for the
same reason).
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import intervalreg
from ._validation import as_matrix, check_alpha
from .errors import NumericalError
from .fullvector import FullVectorProblem, run_test, sample_variance
from .inference import ProjectionData, projection_test
from .linalg import DEFAULT_TOLERANCES, PolyhedralSpec, cholesky_factor
from .subvector import (
    SubvectorProblem,
    matched_variance,
    nearest_neighbor_indices,
    run_subvector_test,
)


def correlation_preset(name, p, rho=0.5):
    """Named correlation families: identity, equicorrelated, toeplitz.

    Stand-ins for study designs whose exact matrices are external inputs;
    arbitrary user matrices are accepted wherever a preset is.
    """
    name = str(name).lower()
    if name == "identity":
        return np.eye(p)
    if name == "equicorrelated":
        if not -1.0 / (p - 1) < rho < 1.0:
            raise ValueError(f"equicorrelation {rho} is not positive definite at p={p}")
        return np.full((p, p), float(rho)) + (1.0 - rho) * np.eye(p)
    if name == "toeplitz":
        idx = np.arange(p)
        return float(rho) ** np.abs(idx[:, None] - idx[None, :])
    raise ValueError(f"unknown correlation preset {name!r}")


@dataclass(frozen=True)
class FullVectorDesign:
    """Gaussian location design: W ~ N(mu, omega), testing E[W] >= 0 at 0."""

    p: int
    omega: np.ndarray
    mu_null: tuple = ()
    mu_alt: tuple = ()
    n: int = 100
    replications: int = 10_000
    seed: int = 0

    def __post_init__(self):
        omega = as_matrix(self.omega, "omega", shape=(self.p, self.p))
        if np.max(np.abs(np.diag(omega) - 1.0)) > 1e-8:
            raise ValueError("omega must be a correlation matrix (unit diagonal)")
        cholesky_factor(omega)  # raises CovarianceError if not PD
        nulls = tuple(tuple(float(v) for v in np.atleast_1d(m)) for m in self.mu_null)
        alts = tuple(tuple(float(v) for v in np.atleast_1d(m)) for m in self.mu_alt)
        for m in nulls:
            if len(m) != self.p:
                raise ValueError("every mu point must have length p")
            if any(v < 0 for v in m):
                raise ValueError(f"null point {m} violates mu >= 0")
        for m in alts:
            if len(m) != self.p:
                raise ValueError("every mu point must have length p")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "mu_null", nulls)
        object.__setattr__(self, "mu_alt", alts)
        if not nulls and not alts:
            raise ValueError("the design needs at least one mu point")
        if self.n < 2 or self.replications < 1:
            raise ValueError("need n >= 2 and replications >= 1")


@dataclass
class PointResult:
    point_id: str
    point: tuple
    is_null: bool
    n: int
    replications: int
    rejection_rate: float
    mc_se: float
    statistics: np.ndarray | None = None
    critical_values: np.ndarray | None = None
    rejects: np.ndarray | None = None
    means: np.ndarray | None = None
    seconds: float = 0.0


@dataclass
class MonteCarloReport:
    design: dict
    variant: str
    alpha: float
    seed: int
    points: list
    mnrp: float | None = None
    wap: float | None = None
    scwap: float | None = None
    correction: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def timings(self):
        return {pt.point_id: pt.seconds for pt in self.points}

    def to_rows(self):
        rows = []
        for pt in self.points:
            rows.append({
                "design": self.design.get("name", ""),
                "variant": self.variant,
                "point_id": pt.point_id,
                "point": " ".join(f"{v:.6g}" for v in pt.point),
                "is_null": int(pt.is_null),
                "n": pt.n,
                "replications": pt.replications,
                "rejection_rate": f"{pt.rejection_rate:.6f}",
                "mc_se": f"{pt.mc_se:.6f}",
            })
        return rows

    def to_csv(self, path):
        rows = self.to_rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)

    def summary(self):
        # timings intentionally excluded: output files are byte-reproducible
        return {
            "design": self.design,
            "variant": self.variant,
            "alpha": self.alpha,
            "seed": self.seed,
            "mnrp": self.mnrp,
            "wap": self.wap,
            "scwap": self.scwap,
            "correction": self.correction,
            "diagnostics": self.diagnostics,
            "points": [{
                "point_id": pt.point_id,
                "point": list(pt.point),
                "is_null": pt.is_null,
                "n": pt.n,
                "replications": pt.replications,
                "rejection_rate": pt.rejection_rate,
                "mc_se": pt.mc_se,
            } for pt in self.points],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _rate_and_se(rejects):
    rate = float(np.mean(rejects))
    return rate, math.sqrt(max(rate * (1.0 - rate), 0.0) / len(rejects))


def _point_stream(seed, tag):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, tag])))


def simulate_fullvector(design, variant="rcc", known_variance=True, alpha=0.05,
                        tol=DEFAULT_TOLERANCES, store_draws=False,
                        chunk=2_000):
    """Rejection rates of the chosen test over the design's mu points."""
    alpha = check_alpha(alpha)
    p = design.p
    spec = PolyhedralSpec(-np.eye(p), np.zeros(p))
    omega_chol = np.linalg.cholesky(design.omega)
    points = ([("null", m) for m in design.mu_null]
              + [("alt", m) for m in design.mu_alt])
    results = []
    for idx, (kind, mu) in enumerate(points):
        t0 = time.perf_counter()
        rng = _point_stream(design.seed, idx)
        s_total = design.replications
        stats = np.empty(s_total)
        cvs = np.empty(s_total)
        rejects = np.empty(s_total, dtype=bool)
        means = np.empty((s_total, p)) if store_draws else None
        mu_arr = np.asarray(mu)
        done = 0
        while done < s_total:
            m = min(chunk if not known_variance else s_total, s_total - done)
            if known_variance:
                m_bars = mu_arr + (rng.standard_normal((m, p)) @ omega_chol.T) / math.sqrt(design.n)
                sigmas = None
            else:
                draws = mu_arr + rng.standard_normal((m, design.n, p)) @ omega_chol.T
                m_bars = draws.mean(axis=1)
                sigmas = draws  # per-replication sample variance computed below
            for i in range(m):
                sigma = design.omega if known_variance else sample_variance(sigmas[i])
                problem = FullVectorProblem(m_bar=m_bars[i], sigma=sigma,
                                            n=design.n, spec=spec, alpha=alpha,
                                            tol=tol)
                out = run_test(problem, variant)
                stats[done + i] = out.statistic
                cvs[done + i] = out.critical_value
                rejects[done + i] = out.reject
            if store_draws:
                means[done:done + m] = m_bars
            done += m
        rate, se = _rate_and_se(rejects)
        results.append(PointResult(
            point_id=f"{kind}_{idx}", point=tuple(mu), is_null=kind == "null",
            n=design.n, replications=s_total, rejection_rate=rate, mc_se=se,
            statistics=stats, critical_values=cvs, rejects=rejects,
            means=means, seconds=time.perf_counter() - t0))

    report = MonteCarloReport(
        design={"name": "gaussian-location", "p": p, "n": design.n,
                "known_variance": known_variance},
        variant=variant, alpha=alpha, seed=design.seed, points=results)
    null_ids = [i for i, pt in enumerate(results) if pt.is_null]
    alt_ids = [i for i, pt in enumerate(results) if not pt.is_null]
    if null_ids:
        report.mnrp = max(results[i].rejection_rate for i in null_ids)
    if alt_ids:
        report.wap = float(np.mean([results[i].rejection_rate for i in alt_ids]))
    if null_ids and alt_ids:
        _, _, scwap, corr = compute_metrics(results, null_ids, alt_ids, alpha)
        report.scwap, report.correction = scwap, corr
    return report


def compute_metrics(points, null_ids, alt_ids, alpha):
    """(MNRP, WAP, size-corrected WAP, correction constant).

    The correction is the smallest shift c of every critical value that pulls
    the maximum null rejection down to alpha, found by bisection over the
    stored per-replication statistics.
    """
    alpha = check_alpha(alpha)
    if not null_ids or not alt_ids:
        raise ValueError("need at least one null and one alternative point")
    for i in list(null_ids) + list(alt_ids):
        if points[i].statistics is None or points[i].critical_values is None:
            raise ValueError("size correction requires stored statistics")
    mnrp = max(float(np.mean(points[i].statistics > points[i].critical_values))
               for i in null_ids)
    wap = float(np.mean([np.mean(points[i].statistics > points[i].critical_values)
                         for i in alt_ids]))

    def max_null(c):
        return max(float(np.mean(points[i].statistics > points[i].critical_values + c))
                   for i in null_ids)

    span = max(float(np.max(np.abs(points[i].statistics - points[i].critical_values)))
               for i in list(null_ids) + list(alt_ids)) + 1.0
    if mnrp == alpha:
        correction = 0.0
    else:
        # smallest shift with max-null <= alpha: nonnegative when the test
        # over-rejects, negative (a power credit) when it under-rejects
        lo, hi = (0.0, span) if mnrp > alpha else (-span, 0.0)
        if max_null(lo) <= alpha:
            correction = lo
        else:
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if max_null(mid) <= alpha:
                    hi = mid
                else:
                    lo = mid
            correction = hi
    scwap = float(np.mean([np.mean(points[i].statistics
                                   > points[i].critical_values + correction)
                           for i in alt_ids]))
    return mnrp, wap, scwap, correction


def _replication_stream(seed, rep):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep])))


def simulate_interval_regression(design, variant="srcc", theta_grid=(-1.0,),
                                 alpha=0.05, tol=DEFAULT_TOLERANCES,
                                 null_interval=(-1.203, -0.757)):
    """Rejection rates of a subvector or projection test over a theta grid.

    One dataset is generated per replication (stream keyed by the master seed
    and the replication index) and evaluated at every grid point; nearest
    neighbors are matched once per dataset and reused across the grid.
    ``null_interval`` only labels points for reporting.
    """
    alpha = check_alpha(alpha)
    variant = str(variant).lower()
    thetas = [float(t) for t in theta_grid]
    s_total = design.replications
    k = design.n_moments
    is_sub = variant in ("scc", "srcc")
    rejects = np.zeros((len(thetas), s_total), dtype=bool)
    stats = np.full((len(thetas), s_total), np.nan) if is_sub else None
    cvs = np.full((len(thetas), s_total), np.nan) if is_sub else None
    dropped_any = 0
    errors = 0
    seconds = [0.0] * len(thetas)

    for rep in range(s_total):
        rng = _replication_stream(design.seed, rep)
        data = intervalreg.draw_dataset(design, rng)
        if data.dropped_instruments:
            dropped_any += 1
        nn_seed = int(rng.integers(2 ** 31))
        neighbors = nearest_neighbor_indices(data.z_bin, seed=nn_seed, tol=tol)
        loadings = None if is_sub else intervalreg.nuisance_loadings(data)
        c_mat = intervalreg.nuisance_matrix(data) if is_sub else None
        for t_idx, theta in enumerate(thetas):
            t0 = time.perf_counter()
            m_rows = intervalreg.moment_rows(data, theta)
            try:
                if is_sub:
                    sigma = matched_variance(m_rows, neighbors)
                    problem = SubvectorProblem(
                        b_mat=np.eye(m_rows.shape[1]), c_mat=c_mat,
                        d=np.zeros(m_rows.shape[1]), m_bar=m_rows.mean(axis=0),
                        sigma=sigma, n=design.n_obs, alpha=alpha, tol=tol)
                    out = run_subvector_test(problem, variant)
                    rejects[t_idx, rep] = out.reject
                    stats[t_idx, rep] = out.statistic
                    cvs[t_idx, rep] = out.critical_value
                else:
                    pdata = ProjectionData(
                        m_rows=m_rows, loadings=loadings, z_c=data.z_c,
                        psi_mid=intervalreg.psi_midpoint(data, theta),
                        z=data.z_bin)
                    reject, _ = projection_test(pdata, variant, alpha=alpha,
                                                seed=nn_seed, tol=tol)
                    rejects[t_idx, rep] = reject
            except NumericalError:
                errors += 1
                rejects[t_idx, rep] = False
            seconds[t_idx] += time.perf_counter() - t0

    results = []
    for t_idx, theta in enumerate(thetas):
        rate, se = _rate_and_se(rejects[t_idx])
        is_null = null_interval[0] - 1e-9 <= theta <= null_interval[1] + 1e-9
        results.append(PointResult(
            point_id=f"theta_{t_idx}", point=(theta,), is_null=is_null,
            n=design.n_obs, replications=s_total, rejection_rate=rate, mc_se=se,
            statistics=None if stats is None else stats[t_idx],
            critical_values=None if cvs is None else cvs[t_idx],
            rejects=rejects[t_idx], seconds=seconds[t_idx]))
    report = MonteCarloReport(
        design={"name": "interval-regression", "d_c": design.d_c,
                "n": design.n_obs, "n_trials": design.n_trials,
                "k": k, "theta0": design.theta0},
        variant=variant, alpha=alpha, seed=design.seed, points=results,
        diagnostics={"replications_with_dropped_instruments": dropped_any,
                     "numerical_errors": errors})
    null_ids = [i for i, pt in enumerate(results) if pt.is_null]
    if null_ids:
        report.mnrp = max(results[i].rejection_rate for i in null_ids)
    alt_ids = [i for i, pt in enumerate(results) if not pt.is_null]
    if alt_ids:
        report.wap = float(np.mean([results[i].rejection_rate for i in alt_ids]))
    return report
