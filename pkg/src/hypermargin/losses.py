"""Cosine softmax and adaptive-margin losses with analytic gradients.

Both losses take raw (pre-normalization) embeddings ``E`` (n x d) and
prototypes ``W`` (C x d), normalize rows internally, and return gradients
with respect to the raw inputs.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError

_SIN_FLOOR = 1e-12


@dataclass(frozen=True)
class LossEvaluation:
    loss: float
    grad_embeddings: np.ndarray
    grad_prototypes: np.ndarray
    logits: np.ndarray
    per_sample: np.ndarray


def _unit_rows(m, what):
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
        raise DegenerateInputError(f"{what} contains a zero or non-finite row")
    return m / norms, norms


def _through_normalization(grad_unit, unit, norms):
    # d(v/|v|)/dv applied to an upstream gradient: (g - (g.u) u) / |v|.
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms


def _check_inputs(E, W, labels):
    E = np.asarray(E, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if E.ndim != 2 or W.ndim != 2 or E.shape[1] != W.shape[1]:
        raise ShapeError(f"embeddings {E.shape} and prototypes {W.shape} do not align")
    if E.shape[0] < 1:
        raise ShapeError("need at least one embedding")
    if labels.shape != (E.shape[0],):
        raise ShapeError(f"expected {E.shape[0]} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= W.shape[0]:
        raise ParameterError(f"labels must lie in [0, {W.shape[0]})")
    return E, W, labels


def _softmax_xent(logits, labels):
    rows = np.arange(logits.shape[0])
    top = logits.argmax(axis=1)
    shifted = logits - logits[rows, top][:, None]
    ex = np.exp(shifted)
    ex[rows, top] = 0.0
    # log1p keeps near-zero losses of confidently classified samples accurate.
    log_z = np.log1p(ex.sum(axis=1))
    per_sample = log_z - shifted[rows, labels]
    probs = np.exp(shifted - log_z[:, None])
    return per_sample, probs


def cosine_softmax_loss(E, W, labels, s0):
    """Mean cross-entropy of logits ``s0 * cos(theta_j)``."""
    if s0 <= 0:
        raise ParameterError(f"s0 must be positive, got {s0}")
    E, W, labels = _check_inputs(E, W, labels)
    n = E.shape[0]
    e, e_norm = _unit_rows(E, "embeddings")
    w, w_norm = _unit_rows(W, "prototypes")
    cos = e @ w.T
    logits = s0 * cos
    per_sample, probs = _softmax_xent(logits, labels)

    d_logits = probs
    d_logits[np.arange(n), labels] -= 1.0
    d_cos = d_logits * (s0 / n)
    return LossEvaluation(
        loss=float(per_sample.mean()),
        grad_embeddings=_through_normalization(d_cos @ w, e, e_norm),
        grad_prototypes=_through_normalization(d_cos.T @ e, w, w_norm),
        logits=logits,
        per_sample=per_sample,
    )


def margin_loss(E, W, labels, snapshot):
    """Mean adaptive-margin loss.

    The target logit is ``s_y cos(theta_y + m_y)`` with ``theta_y + m_y``
    clamped to [0, pi]; every other logit is ``s_j cos(theta_j)`` with that
    class's own scale.
    """
    E, W, labels = _check_inputs(E, W, labels)
    C = W.shape[0]
    if snapshot.n_classes != C:
        raise ParameterError(f"snapshot has {snapshot.n_classes} classes, prototypes have {C}")
    return margin_loss_arrays(E, W, labels, snapshot.scales, snapshot.margins)


def margin_loss_arrays(E, W, labels, scales, margins):
    """:func:`margin_loss` with explicit per-class ``scales`` and ``margins``."""
    E, W, labels = _check_inputs(E, W, labels)
    scales = np.asarray(scales, dtype=np.float64)
    margins = np.asarray(margins, dtype=np.float64)
    if scales.shape != (W.shape[0],) or margins.shape != (W.shape[0],):
        raise ParameterError("scales and margins need one entry per class")
    n = E.shape[0]
    rows = np.arange(n)
    e, e_norm = _unit_rows(E, "embeddings")
    w, w_norm = _unit_rows(W, "prototypes")
    cos = e @ w.T

    # d(logit)/d(cos) for each entry; the target column is replaced below.
    dlogit_dcos = np.broadcast_to(scales, cos.shape).copy()
    logits = cos * scales

    m = margins[labels]
    s = scales[labels]
    c_t = cos[rows, labels]
    shifted = m != 0.0
    if shifted.any():
        theta = np.arccos(np.clip(c_t[shifted], -1.0, 1.0))
        phi = theta + m[shifted]
        inside = phi < math.pi
        phi = np.minimum(phi, math.pi)
        idx = rows[shifted]
        logits[idx, labels[idx]] = s[shifted] * np.cos(phi)
        # d cos(theta + m) / d cos(theta) = sin(theta + m) / sin(theta); zero on the clamp.
        ratio = np.where(inside, np.sin(phi) / np.maximum(np.sin(theta), _SIN_FLOOR), 0.0)
        dlogit_dcos[idx, labels[idx]] = s[shifted] * ratio

    per_sample, probs = _softmax_xent(logits, labels)
    d_logits = probs
    d_logits[rows, labels] -= 1.0
    d_cos = d_logits * dlogit_dcos / n
    return LossEvaluation(
        loss=float(per_sample.mean()),
        grad_embeddings=_through_normalization(d_cos @ w, e, e_norm),
        grad_prototypes=_through_normalization(d_cos.T @ e, w, w_norm),
        logits=logits,
        per_sample=per_sample,
    )


def finite_difference_check(loss_fn, E, W, h=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(E, W)`` must return a :class:`LossEvaluation`. Relative error
    per coordinate uses ``max(|analytic|, |numeric|, 1e-12)`` as denominator.
    Differences are taken per sample before averaging so that terms untouched
    by a perturbation cancel exactly.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ParameterError(f"step h={h} outside [1e-7, 1e-3]")
    E = np.array(E, dtype=np.float64)
    W = np.array(W, dtype=np.float64)
    base = loss_fn(E, W)
    worst = 0.0
    for which, analytic in ((E, base.grad_embeddings), (W, base.grad_prototypes)):
        for idx in np.ndindex(which.shape):
            orig = which[idx]
            which[idx] = orig + h
            up = loss_fn(E, W).per_sample
            which[idx] = orig - h
            down = loss_fn(E, W).per_sample
            which[idx] = orig
            numeric = float(np.mean(up - down)) / (2.0 * h)
            a = analytic[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            worst = max(worst, err)
    return worst
