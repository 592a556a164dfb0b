"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np


def as_vector(x, name="vector", length=None):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        v = v.reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must have finite entries")
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {v.shape[0]}")
    return v


def as_matrix(x, name="matrix", shape=None):
    m = np.asarray(x, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} must have finite entries")
    if shape is not None:
        want_r, want_c = shape
        if want_r is not None and m.shape[0] != want_r:
            raise ValueError(f"{name} must have {want_r} rows, got {m.shape[0]}")
        if want_c is not None and m.shape[1] != want_c:
            raise ValueError(f"{name} must have {want_c} columns, got {m.shape[1]}")
    return m


def check_symmetric(m, name="matrix", rtol=1e-8):
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > rtol * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


def check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")
    return alpha


def check_prob(p, name="p"):
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    return p
