"""Geometric-median prototypes and nearest-prototype classification."""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, MissingClassError, ShapeError

ANCHOR_TOL = 1e-12


@dataclass(frozen=True)
class PrototypeSet:
    weight_prototypes: np.ndarray
    median_prototypes: np.ndarray
    source_counts: np.ndarray


def weiszfeld_iterates(points, tol=1e-9, max_iter=1000):
    """Yield successive Weiszfeld iterates for the Euclidean geometric median.

    Starts at the normalized mean and stops once a step moves less than
    ``tol``. If an iterate lands on a data point, that point is yielded last.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateInputError("geometric median of an empty point set")
    mean = X.mean(axis=0)
    norm = np.linalg.norm(mean)
    y = mean / norm if norm > 0 else mean
    yield y
    for _ in range(max_iter):
        dist = np.linalg.norm(X - y, axis=1)
        hit = dist < ANCHOR_TOL
        if hit.any():
            yield X[int(np.argmax(hit))].copy()
            return
        inv = 1.0 / dist
        y_next = (inv @ X) / inv.sum()
        yield y_next
        if np.linalg.norm(y_next - y) < tol:
            return
        y = y_next


def weiszfeld_objective(y, points):
    return float(np.linalg.norm(np.asarray(points) - y, axis=1).sum())


def geometric_median(points, tol=1e-9, max_iter=1000):
    """Euclidean geometric median of unit ``points`` projected onto the sphere."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateInputError("geometric median of an empty point set")
    if X.shape[0] == 1:
        return X[0] / np.linalg.norm(X[0])
    y = None
    for y in weiszfeld_iterates(X, tol, max_iter):
        pass
    norm = np.linalg.norm(y)
    if not norm > 0.0:
        raise DegenerateInputError("geometric median sits at the origin; no direction to project")
    return y / norm


def build_prototypes(rows, labels, n_classes, tol=1e-9, max_iter=1000):
    """Per-class geometric-median prototypes; returns ``(medians, counts)``."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels)
    medians = np.empty((n_classes, rows.shape[1]))
    counts = np.bincount(labels, minlength=n_classes)[:n_classes]
    for c in range(n_classes):
        if counts[c] == 0:
            raise MissingClassError(c)
        medians[c] = geometric_median(rows[labels == c], tol, max_iter)
    return medians, counts


def classify(rows, prototypes):
    """Nearest prototype by cosine; ``argmax`` already breaks ties toward the smallest id."""
    rows = np.asarray(rows, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if rows.shape[-1] != prototypes.shape[-1]:
        raise ShapeError(
            f"embedding dimension {rows.shape[-1]} != prototype dimension {prototypes.shape[-1]}"
        )
    return np.argmax(rows @ prototypes.T, axis=1)
