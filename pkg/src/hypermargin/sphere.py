"""Points and angles on the unit hypersphere S^{d-1}.

Unit vectors are plain float64 numpy arrays; ``EmbeddingBatch`` pairs a
matrix of unit rows with integer class labels.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError

UNIT_TOL = 1e-9


def normalize(v):
    """Scale ``v`` to unit Euclidean norm.

    Vectors already within ``UNIT_TOL`` of unit norm are returned unchanged,
    which makes the map exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ShapeError(f"expected a vector of length >= 2, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero or non-finite vector")
    if abs(norm - 1.0) <= UNIT_TOL:
        return v.copy()
    return v / norm


def normalize_rows(m):
    """Row-wise version of :func:`normalize` for an ``n x d`` matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d array, got shape {m.shape}")
    norms = np.linalg.norm(m, axis=1)
    bad = ~np.isfinite(norms) | (norms == 0.0)
    if bad.any():
        raise DegenerateInputError(f"row {int(np.argmax(bad))} has zero or non-finite norm")
    out = m.copy()
    drift = np.abs(norms - 1.0) > UNIT_TOL
    out[drift] /= norms[drift, None]
    return out


def angular_distance(a, b):
    """Angle in radians between unit vectors ``a`` and ``b``, in [0, pi]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))


def pairwise_angles(a, b=None):
    """Matrix of angular distances between the rows of ``a`` and ``b``.

    With ``b`` omitted the diagonal is exactly zero (rounding in ``a @ a.T``
    would otherwise leave arccos(1 - eps) ~ 1e-8 there).
    """
    a = np.asarray(a, dtype=np.float64)
    same = b is None
    b = a if same else np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    D = np.arccos(np.clip(a @ b.T, -1.0, 1.0))
    if same:
        np.fill_diagonal(D, 0.0)
    return D


def sample_uniform_sphere(d, rng, size=None):
    """Uniform draw(s) on S^{d-1} by normalizing standard Gaussians.

    With ``size=None`` a single vector is returned, otherwise a
    ``size x d`` matrix.
    """
    if d < 2:
        raise ShapeError(f"sphere dimension must be >= 2, got {d}")
    if size is None:
        g = rng.standard_normal(d)
        return g / np.linalg.norm(g)
    g = rng.standard_normal((size, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class EmbeddingBatch:
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 2:
            raise ShapeError(f"rows must be n x d with n >= 1, d >= 2; got {rows.shape}")
        if labels.shape != (rows.shape[0],):
            raise ShapeError(f"expected {rows.shape[0]} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or not np.issubdtype(labels.dtype, np.integer)):
            raise ShapeError("labels must be non-negative integers")
        rows = normalize_rows(rows)
        rows.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def of_class(self, c):
        return self.rows[self.labels == c]
