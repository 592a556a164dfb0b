"""Polyhedral primitives against brute-force oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ineqtest import (
    BudgetExceededError,
    CovarianceError,
    PolyhedralSpec,
    Tolerances,
    cholesky_factor,
    enumerate_vertices,
    matrix_rank,
    project_polyhedron,
    reduced_row_echelon,
    solve_lp,
)
from ineqtest.errors import InfeasibleError

from generators import random_polyhedron, random_spd


class TestSolveLp:
    def test_bounded_box_with_tie(self):
        # brute force over basic feasible solutions gives -1 at (1, 1)
        res = solve_lp([-1.0, 0.0], (np.array([[1.0, -1.0]]), [0.0]),
                       [(0.0, 1.0), (0.0, 1.0)])
        assert res.optimal
        assert res.value == pytest.approx(-1.0, abs=1e-12)
        assert res.x == pytest.approx([1.0, 1.0], abs=1e-12)

    def test_pinned_variable(self):
        res = solve_lp([-1.0, 0.0], (np.array([[1.0, 0.0]]), [0.0]),
                       [(0.0, 1.0), (0.0, 1.0)])
        assert res.optimal
        assert res.value == pytest.approx(0.0, abs=1e-12)
        assert res.x[0] == pytest.approx(0.0, abs=1e-12)

    def test_contradictory_equalities(self):
        res = solve_lp([1.0, 1.0],
                       (np.array([[1.0, 1.0], [1.0, 1.0]]), [1.0, 2.0]),
                       [(0.0, math.inf)] * 2)
        assert res.status == "infeasible"

    def test_unbounded(self):
        res = solve_lp([-1.0], (np.zeros((0, 1)), []), [(0.0, math.inf)])
        assert res.status == "unbounded"

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solve_lp([1.0, 2.0], (np.array([[1.0]]), [0.0]), [(0, 1), (0, 1)])

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(3, 6))
        x0 = np.abs(rng.normal(size=6))
        b = a @ x0
        c = rng.normal(size=6)
        r1 = solve_lp(c, (a, b), [(0.0, 10.0)] * 6)
        r2 = solve_lp(c, (a, b), [(0.0, 10.0)] * 6)
        assert r1.status == r2.status
        assert r1.value == r2.value
        assert np.array_equal(r1.x, r2.x)
        assert r1.basis == r2.basis

    def _brute_force_bfs(self, c, a, b, lo, hi):
        """Enumerate candidate bases; nonbasic variables sit at a bound."""
        m, n = a.shape
        best = math.inf
        for basis in itertools.combinations(range(n), m):
            others = [j for j in range(n) if j not in basis]
            for corner in itertools.product(*[(lo[j], hi[j]) for j in others]):
                sub = a[:, list(basis)]
                if abs(np.linalg.det(sub)) < 1e-10:
                    continue
                rhs = b - sum(a[:, j] * v for j, v in zip(others, corner))
                xb = np.linalg.solve(sub, rhs)
                x = np.zeros(n)
                x[list(basis)] = xb
                for j, v in zip(others, corner):
                    x[j] = v
                if np.all(x >= lo - 1e-9) and np.all(x <= hi + 1e-9):
                    best = min(best, float(c @ x))
        return best

    def test_random_instances_against_bfs_enumeration(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            m, n = 2, int(rng.integers(3, 6))
            a = rng.normal(size=(m, n))
            x0 = rng.uniform(0.0, 1.0, n)
            b = a @ x0
            c = rng.normal(size=n)
            lo, hi = np.zeros(n), np.ones(n)
            res = solve_lp(c, (a, b), [(0.0, 1.0)] * n)
            assert res.optimal
            oracle = self._brute_force_bfs(c, a, b, lo, hi)
            assert res.value == pytest.approx(oracle, abs=1e-8)


class TestProjection:
    def test_interior_point_is_fixed(self):
        spec = PolyhedralSpec(np.eye(2), np.zeros(2))
        res = project_polyhedron(np.array([-1.0, -1.0]), np.eye(2), spec)
        assert res.distance_sq == 0.0
        assert res.mu_hat == pytest.approx([-1.0, -1.0])
        assert len(res.active_set) == 0

    def test_corner_geometry(self):
        spec = PolyhedralSpec(np.eye(2), np.zeros(2))
        res = project_polyhedron(np.array([2.0, -3.5]), np.eye(2), spec)
        assert res.mu_hat == pytest.approx([0.0, -3.5], abs=1e-12)
        assert res.distance_sq == pytest.approx(4.0, abs=1e-12)
        assert list(res.active_set) == [0]

    def test_infeasible_polyhedron(self):
        spec = PolyhedralSpec(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
        with pytest.raises(InfeasibleError):
            project_polyhedron(np.array([0.0]), np.eye(1), spec)

    def test_non_pd_sigma(self):
        spec = PolyhedralSpec(np.eye(2), np.zeros(2))
        with pytest.raises(CovarianceError):
            project_polyhedron(np.zeros(2), np.ones((2, 2)), spec)

    def _grid_search_oracle(self, x, sigma, spec, anchor):
        """Refining grid search; valid because the objective is convex.

        The box recenters on the best feasible lattice point and only shrinks
        while that point stays interior, so the search can slide along
        oblique facet intersections before refining.
        """
        inv = np.linalg.inv(sigma)

        def objective(pts):
            diff = pts - x
            return np.einsum("ij,jk,ik->i", diff, inv, diff)

        center = anchor.copy()
        radius = float(np.linalg.norm(anchor - x)) * 4.2 + 1.0
        best_val = math.inf
        step = radius / 10.0
        target = 2e-6 * (1.0 + float(np.linalg.norm(x)))
        for _ in range(120):
            if step < target:
                break
            axes = [np.arange(c - 10 * step, c + 10 * step + step / 2, step)
                    for c in center]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            feas = np.all(pts @ spec.a_mat.T <= spec.b + 1e-12, axis=1)
            if not np.any(feas):
                step /= 5.0
                continue
            pts = pts[feas]
            vals = objective(pts)
            k = int(np.argmin(vals))
            best_val = min(best_val, float(vals[k]))
            moved = float(np.max(np.abs(pts[k] - center)))
            center = pts[k]
            if moved <= 4.0 * step:
                step /= 5.0
        return best_val

    def _face_enumeration_oracle(self, x, sigma, spec):
        """Exact minimum by enumerating every candidate active face."""
        d_a = spec.n_rows
        inv = np.linalg.inv(sigma)
        best = math.inf
        for size in range(0, d_a + 1):
            for rows in itertools.combinations(range(d_a), size):
                if rows:
                    a_j = spec.a_mat[list(rows)]
                    gram = a_j @ sigma @ a_j.T
                    eta = np.linalg.lstsq(gram, a_j @ x - spec.b[list(rows)],
                                          rcond=None)[0]
                    mu = x - sigma @ a_j.T @ eta
                else:
                    mu = x
                if np.all(spec.a_mat @ mu <= spec.b + 1e-9 * (1 + np.abs(spec.b))):
                    diff = x - mu
                    best = min(best, float(diff @ inv @ diff))
        return best

    def test_random_instances_against_grid_search(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            d_m = int(rng.integers(1, 4))
            spec, anchor = random_polyhedron(rng, d_m, int(rng.integers(1, 5)))
            sigma = random_spd(rng, d_m)
            x = anchor + rng.normal(size=d_m)
            res = project_polyhedron(x, sigma, spec)
            oracle = self._grid_search_oracle(x, sigma, spec, anchor)
            # the lattice can never beat the true minimum, and its own
            # granularity near tilted facets is |grad| * step
            assert res.distance_sq <= oracle + 1e-8
            assert oracle - res.distance_sq < 2e-3 * (1.0 + res.distance_sq)
            exact = self._face_enumeration_oracle(x, sigma, spec)
            assert res.distance_sq == pytest.approx(exact, abs=1e-9)

    def test_idempotence_and_kkt_residuals(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            d_m = int(rng.integers(1, 5))
            spec, anchor = random_polyhedron(rng, d_m, int(rng.integers(1, 6)))
            sigma = random_spd(rng, d_m)
            x = anchor + rng.normal(size=d_m) * 1.5
            res = project_polyhedron(x, sigma, spec)
            again = project_polyhedron(res.mu_hat, sigma, spec)
            assert np.max(np.abs(again.mu_hat - res.mu_hat)) <= 1e-10
            grad = np.linalg.solve(sigma, x - res.mu_hat)
            kkt = grad - spec.a_mat.T @ res.multipliers
            assert np.linalg.norm(kkt) <= 1e-7 * (1.0 + np.linalg.norm(x))
            assert np.all(res.multipliers >= 0.0)
            assert np.all(spec.a_mat @ res.mu_hat <= spec.b + 1e-9 * (1 + np.abs(spec.b)))

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            d_m = int(rng.integers(1, 4))
            spec, anchor = random_polyhedron(rng, d_m, int(rng.integers(2, 5)))
            sigma = random_spd(rng, d_m)
            x = anchor + rng.normal(size=d_m)
            base = project_polyhedron(x, sigma, spec)
            scale = np.exp(rng.uniform(-2, 2, spec.n_rows))
            scaled = PolyhedralSpec(spec.a_mat * scale[:, None], spec.b * scale)
            res = project_polyhedron(x, sigma, scaled)
            assert np.max(np.abs(res.mu_hat - base.mu_hat)) <= 1e-8
            assert abs(res.distance_sq - base.distance_sq) <= 1e-8 * (1 + base.distance_sq)
            a_base = matrix_rank(spec.a_mat[base.active_set])
            a_scaled = matrix_rank(scaled.a_mat[res.active_set])
            assert a_base == a_scaled


class TestRankAndEchelon:
    def test_rank_basics(self):
        assert matrix_rank(np.eye(3)) == 3
        assert matrix_rank(np.zeros((2, 2))) == 0
        assert matrix_rank([[1.0, 2.0], [2.0, 4.0]]) == 1
        assert matrix_rank(np.zeros((0, 3))) == 0

    def _minor_rank(self, m):
        """Largest size of a square submatrix with nonzero integer determinant."""
        m = np.asarray(m)
        for size in range(min(m.shape), 0, -1):
            for rows in itertools.combinations(range(m.shape[0]), size):
                for cols in itertools.combinations(range(m.shape[1]), size):
                    if round(np.linalg.det(m[np.ix_(rows, cols)])) != 0:
                        return size
        return 0

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_rank_matches_minor_expansion_and_transpose(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.integers(-3, 4, size=(4, 4)).astype(float)
        rank = matrix_rank(m)
        assert rank == matrix_rank(m.T)
        assert rank == self._minor_rank(m)

    def test_echelon_single_equation(self):
        pivot, free, g1 = reduced_row_echelon(np.array([[1.0, -1.0]]))
        assert list(pivot) == [0] and list(free) == [1]
        np.testing.assert_allclose(g1, [[1.0]], atol=1e-12)

    def test_echelon_identity(self):
        pivot, free, g1 = reduced_row_echelon(np.eye(2))
        assert list(pivot) == [0, 1] and list(free) == []
        assert g1.shape == (2, 0)

    def test_echelon_substitution(self):
        pivot, free, g1 = reduced_row_echelon(np.array([[1.0, 1.0, 0.0],
                                                        [0.0, 0.0, 1.0]]))
        assert list(pivot) == [0, 2] and list(free) == [1]
        np.testing.assert_allclose(g1, [[-1.0], [0.0]], atol=1e-12)

    def test_parametric_form_annihilates_and_detects(self):
        rng = np.random.default_rng(8)
        violations = 0
        for _ in range(100):
            rows, cols = int(rng.integers(1, 5)), int(rng.integers(2, 7))
            e = rng.normal(size=(rows, cols))
            if rows > 1 and rng.random() < 0.5:
                e[-1] = e[0] * rng.uniform(-2, 2)  # dependent row
            pivot, free, g1 = reduced_row_echelon(e)
            scale = 1.0 + float(np.max(np.abs(e)))
            for _ in range(10):
                h = np.zeros(cols)
                y = rng.normal(size=len(free))
                h[free] = y
                if len(pivot):
                    h[pivot] = g1 @ y
                assert np.max(np.abs(e @ h), initial=0.0) <= 1e-9 * scale
            for _ in range(10):
                h = rng.normal(size=cols)
                y = h[free]
                expected = g1 @ y if len(pivot) else np.zeros(0)
                if len(pivot) and np.max(np.abs(h[pivot] - expected)) > 1e-4:
                    if np.max(np.abs(e @ h)) <= 1e-9 * scale:
                        violations += 1
        assert violations == 0


class TestCholesky:
    def test_identity_and_diagonal(self):
        assert cholesky_factor(np.eye(3)) == pytest.approx(np.eye(3))
        assert cholesky_factor(np.diag([4.0, 9.0])) == pytest.approx(np.diag([2.0, 3.0]))

    def test_singular_reports_pivot(self):
        with pytest.raises(CovarianceError) as err:
            cholesky_factor(np.ones((2, 2)))
        assert err.value.pivot_index == 2

    def test_reconstruction(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            sigma = random_spd(rng, int(rng.integers(1, 6)))
            lower = cholesky_factor(sigma)
            assert lower @ lower.T == pytest.approx(sigma, abs=1e-10)
            assert np.allclose(np.triu(lower, 1), 0.0)


class TestEnumerateVertices:
    def test_simplex(self):
        h = enumerate_vertices(np.zeros((3, 0)))
        assert h.shape == (3, 3)
        assert sorted(tuple(np.round(r, 9)) for r in h) == [
            (0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)]

    def test_single_vertex(self):
        h = enumerate_vertices(np.array([[1.0], [-1.0]]))
        np.testing.assert_allclose(h, [[0.5, 0.5]], atol=1e-12)

    def test_infeasible(self):
        h = enumerate_vertices(np.array([[1.0], [1.0]]))
        assert h.shape == (0, 2)

    def test_budget_guard(self):
        rng = np.random.default_rng(1)
        with pytest.raises(BudgetExceededError):
            enumerate_vertices(rng.normal(size=(96, 4)))

    def test_output_is_vertex_set(self):
        rng = np.random.default_rng(12)
        for _ in range(60):
            k = int(rng.integers(2, 7))
            p = int(rng.integers(1, 3))
            c = rng.normal(size=(k, p))
            h = enumerate_vertices(c)
            for row in h:
                assert np.min(row) >= -1e-9
                assert np.max(np.abs(c.T @ row)) <= 1e-8
                assert abs(np.sum(row) - 1.0) <= 1e-9
                active = [np.eye(k)[j] for j in range(k) if row[j] <= 1e-9]
                stacked = np.vstack([c.T, np.ones((1, k))] + active) \
                    if active else np.vstack([c.T, np.ones((1, k))])
                assert matrix_rank(stacked) == k, "active constraints must pin the point"
            # dedupe check
            for i in range(h.shape[0]):
                for j in range(i + 1, h.shape[0]):
                    assert np.max(np.abs(h[i] - h[j])) > 1e-8


class TestTolerances:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Tolerances(tol_feas=-1.0)
