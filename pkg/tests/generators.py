"""Seeded random-instance generators shared across the test modules.

Instances are built around a known strictly feasible point so that the
constraint systems are never empty, with occasional duplicated or
rank-deficient rows to exercise the degenerate-geometry paths.
"""

import numpy as np

from ineqtest import FullVectorProblem, PolyhedralSpec, SubvectorProblem


def random_spd(rng, d, eig_lo=0.3, eig_hi=3.0):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q @ np.diag(rng.uniform(eig_lo, eig_hi, d)) @ q.T


def random_polyhedron(rng, d_m, d_a, binding_frac=0.4):
    """(spec, anchor): anchor is feasible, some rows exactly binding at it."""
    a = rng.normal(size=(d_a, d_m))
    if d_a > 1 and rng.random() < 0.25:
        src = int(rng.integers(d_a - 1))
        a[d_a - 1] = a[src] * rng.uniform(0.5, 2.0)  # collinear row
    anchor = rng.normal(size=d_m)
    slack = np.abs(rng.normal(size=d_a)) * (rng.random(d_a) > binding_frac)
    return PolyhedralSpec(a, a @ anchor + slack), anchor


def random_fullvector_problem(rng, d_max=4, rows_max=6, alpha_choices=(0.05, 0.1, 0.2)):
    d_m = int(rng.integers(1, d_max + 1))
    d_a = int(rng.integers(1, rows_max + 1))
    spec, anchor = random_polyhedron(rng, d_m, d_a)
    m_bar = anchor + rng.normal(size=d_m) * 0.8
    return FullVectorProblem(
        m_bar=m_bar, sigma=random_spd(rng, d_m),
        n=int(rng.choice([1, 25, 100])), spec=spec,
        alpha=float(rng.choice(alpha_choices)))


def random_subvector_problem(rng, d_m_max=3, k_max=6, p_max=2):
    """Random instance with a guaranteed-feasible joint constraint system."""
    d_m = int(rng.integers(1, d_m_max + 1))
    k = int(rng.integers(2, k_max + 1))
    p = int(rng.integers(1, p_max + 1))
    b = rng.normal(size=(k, d_m))
    if k > 1 and rng.random() < 0.3:
        b = rng.normal(size=(k, 1)) @ rng.normal(size=(1, d_m))
    c = rng.normal(size=(k, p))
    if rng.random() < 0.2:
        c[int(rng.integers(k))] = 0.0
    mu0 = rng.normal(size=d_m)
    delta0 = rng.normal(size=p)
    slack = np.abs(rng.normal(size=k)) * (rng.random(k) < 0.7)
    d = b @ mu0 - c @ delta0 + slack
    return SubvectorProblem(
        b_mat=b, c_mat=c, d=d, m_bar=mu0 + rng.normal(size=d_m) * 0.7,
        sigma=random_spd(rng, d_m), n=int(rng.choice([1, 25, 100])),
        alpha=float(rng.choice([0.05, 0.1])))
