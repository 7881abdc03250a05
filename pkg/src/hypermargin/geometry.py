"""Voronoi-cell geometry, adaptive margins, concentration-aware scales and
ETF diagnostics.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError, ParameterError
from .vmf import apex_angle_approx

MARGIN_CAP = math.pi / 2
SINGULAR_FLOOR = 1e-10


@dataclass(frozen=True)
class ClassGeometry:
    class_id: int
    mu: np.ndarray
    kappa: float
    theta_vmf: float
    margin: float
    scale: float


@dataclass(frozen=True)
class GeometrySnapshot:
    classes: tuple
    theta_cell: float
    theta_vmf_min: float
    s0: float
    alpha: float

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def margins(self):
        return np.array([g.margin for g in self.classes])

    @property
    def scales(self):
        return np.array([g.scale for g in self.classes])

    @property
    def kappas(self):
        return np.array([g.kappa for g in self.classes])

    @property
    def theta_vmf(self):
        return np.array([g.theta_vmf for g in self.classes])


def voronoi_apex_angle(n_classes):
    """arccos(-1/(C-1)): apex angle of the cone over one ETF Voronoi cell."""
    if n_classes < 2:
        raise ParameterError(f"need at least 2 classes, got {n_classes}")
    return math.acos(-1.0 / (n_classes - 1))


def adaptive_margin(theta_vmf_i, theta_cell, theta_vmf_min):
    if theta_vmf_min > theta_vmf_i:
        raise InvariantViolationError(
            f"theta_vmf_min={theta_vmf_min} exceeds the class apex angle {theta_vmf_i}"
        )
    m = max(0.5 * (theta_vmf_i - theta_cell), 0.5 * (theta_vmf_i - theta_vmf_min))
    return min(max(m, 0.0), MARGIN_CAP)


def concentration_scales(kappas, s0):
    """Per-class logit scales from a reversed soft ranking of log-kappa.

    ``r = C * softmax(log(kappa) / C)``; the sorted values of ``r`` are then
    handed out in reverse kappa order (ties by class id), so the least
    concentrated class gets the largest scale. Mean scale equals ``s0``.
    """
    kappas = np.asarray(kappas, dtype=np.float64)
    C = kappas.shape[0]
    if C < 2:
        raise ParameterError(f"need at least 2 classes, got {C}")
    if s0 <= 0:
        raise ParameterError(f"s0 must be positive, got {s0}")
    if not np.all(kappas > 0):
        raise ParameterError("all kappas must be positive")
    z = np.log(kappas) / C
    e = np.exp(z - z.max())
    r = C * e / e.sum()
    order = np.argsort(kappas, kind="stable")
    reversed_r = np.empty(C)
    reversed_r[order] = np.sort(r)[::-1]
    return s0 * reversed_r


def build_snapshot(mus, kappas, d, s0, alpha=0.95):
    """Assemble a GeometrySnapshot from per-class directions and concentrations."""
    kappas = np.asarray(kappas, dtype=np.float64)
    C = kappas.shape[0]
    theta_cell = voronoi_apex_angle(C)
    thetas = [apex_angle_approx(k, d, alpha) for k in kappas]
    theta_min = min(thetas)
    scales = concentration_scales(kappas, s0)
    classes = tuple(
        ClassGeometry(c, np.asarray(mus[c]), float(kappas[c]), thetas[c],
                      adaptive_margin(thetas[c], theta_cell, theta_min), float(scales[c]))
        for c in range(C)
    )
    return GeometrySnapshot(classes, theta_cell, theta_min, float(s0), float(alpha))


def uniform_snapshot(n_classes, s0, d=None, alpha=0.95):
    """Zero margins and uniform scale: the plain cosine-softmax setting."""
    theta_cell = voronoi_apex_angle(n_classes)
    mu = np.full(d, np.nan) if d else np.empty(0)
    classes = tuple(
        ClassGeometry(c, mu, math.nan, math.nan, 0.0, float(s0)) for c in range(n_classes)
    )
    return GeometrySnapshot(classes, theta_cell, math.nan, float(s0), float(alpha))


def etf_diagnostics(prototypes):
    """Distance of prototype rows from a simplex ETF.

    Returns ``(max_offdiag_deviation, gram_condition)`` where the deviation is
    ``max_{i != j} |w_i . w_j + 1/(C-1)|`` and the condition number is taken
    over singular values above ``SINGULAR_FLOOR``.
    """
    P = np.asarray(prototypes, dtype=np.float64)
    C = P.shape[0]
    if C < 2:
        raise ParameterError(f"need at least 2 prototypes, got {C}")
    G = P @ P.T
    off = ~np.eye(C, dtype=bool)
    deviation = float(np.max(np.abs(G[off] + 1.0 / (C - 1))))
    sv = np.linalg.svd(P, compute_uv=False)
    sv = sv[sv > SINGULAR_FLOOR]
    return deviation, float(sv.max() / sv.min())
