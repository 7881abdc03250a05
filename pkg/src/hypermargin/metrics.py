"""Classification, distortion-proxy and clustering metrics.

Undefined ratios (zero denominators) are reported as 0, and MCC is 0
whenever any marginal of its 2x2 table is empty.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .sphere import pairwise_angles


@dataclass(frozen=True)
class BinaryScores:
    mcc: float
    f1: float
    recall: float
    precision: float


@dataclass(frozen=True)
class MetricsRecord:
    binary: BinaryScores
    cwe_macro: BinaryScores
    macro_fnr_plus_fpr: float
    nmi: float
    ari: float
    angular_silhouette: float

    def as_dict(self):
        return asdict(self)


def confusion_matrix(y_true, y_pred, n_classes):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _ratio(num, den):
    return num / den if den else 0.0


def scores_from_counts(tp, fn, fp, tn):
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(den) if den else 0.0
    return BinaryScores(float(mcc), float(f1), float(recall), float(precision))


def _one_vs_all(cm, c):
    tp = int(cm[c, c])
    fn = int(cm[c].sum()) - tp
    fp = int(cm[:, c].sum()) - tp
    tn = int(cm.sum()) - tp - fn - fp
    return tp, fn, fp, tn


def binary_metrics(cm, nonvul_class=0):
    """Collapse every class except ``nonvul_class`` into one positive class."""
    cm = np.asarray(cm)
    C = cm.shape[0]
    if not 0 <= nonvul_class < C:
        raise ParameterError(f"nonvul_class {nonvul_class} outside [0, {C})")
    pos = np.arange(C) != nonvul_class
    tp = int(cm[np.ix_(pos, pos)].sum())
    fn = int(cm[pos, nonvul_class].sum())
    fp = int(cm[nonvul_class, pos].sum())
    tn = int(cm[nonvul_class, nonvul_class])
    return scores_from_counts(tp, fn, fp, tn)


def cwe_macro_metrics(cm, nonvul_class=0):
    """Unweighted mean of one-vs-all scores over every class but ``nonvul_class``."""
    cm = np.asarray(cm)
    C = cm.shape[0]
    if C < 2:
        raise ParameterError("need at least 2 classes")
    per = [scores_from_counts(*_one_vs_all(cm, c)) for c in range(C) if c != nonvul_class]
    return BinaryScores(*(float(np.mean([getattr(s, f) for s in per]))
                          for f in ("mcc", "f1", "recall", "precision")))


def macro_fnr_fpr(cm):
    """Macro-averaged one-vs-all FNR plus macro-averaged FPR, over all classes."""
    cm = np.asarray(cm)
    fnr, fpr = [], []
    for c in range(cm.shape[0]):
        tp, fn, fp, tn = _one_vs_all(cm, c)
        fnr.append(_ratio(fn, tp + fn))
        fpr.append(_ratio(fp, fp + tn))
    return float(np.mean(fnr) + np.mean(fpr))


def _contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def clustering_scores(labels_true, labels_pred):
    """NMI (arithmetic-mean normalization) and adjusted Rand index."""
    labels_true = np.asarray(labels_true)
    labels_pred = np.asarray(labels_pred)
    if labels_true.shape != labels_pred.shape or labels_true.size == 0:
        raise ParameterError("label sequences must have equal, non-zero length")
    n = labels_true.size
    table = _contingency(labels_true, labels_pred)
    rows, cols = table.sum(axis=1), table.sum(axis=0)

    h_true, h_pred = _entropy(rows, n), _entropy(cols, n)
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(rows, cols)[nz] / (n * n)
    mi = float((joint * np.log(joint / outer)).sum())
    if h_true == 0.0 and h_pred == 0.0:
        nmi = 1.0
    else:
        denom = 0.5 * (h_true + h_pred)
        nmi = min(max(mi / denom, 0.0), 1.0) if denom > 0 else 0.0

    def pairs(x):
        return (x * (x - 1) // 2).sum()

    sum_cells = float(pairs(table))
    sum_rows, sum_cols = float(pairs(rows)), float(pairs(cols))
    total = n * (n - 1) / 2
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        ari = 1.0 if sum_rows == sum_cols else 0.0
    else:
        ari = (sum_cells - expected) / (max_index - expected)
    return {"nmi": float(nmi), "ari": float(ari)}


def angular_silhouette(rows, labels):
    """Mean silhouette coefficient with angular distance as dissimilarity."""
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise DegenerateInputError("silhouette needs at least two classes")
    D = pairwise_angles(rows)
    member = labels[:, None] == classes[None, :]
    counts = member.sum(axis=0)
    sums = D @ member
    own = np.searchsorted(classes, labels)
    n = rows.shape[0]
    idx = np.arange(n)
    own_count = counts[own]
    a = np.where(own_count > 1, sums[idx, own] / np.maximum(own_count - 1, 1), 0.0)
    means = sums / counts
    means[idx, own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own_count > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def evaluate(y_true, y_pred, rows, n_classes, nonvul_class=0):
    """Full MetricsRecord for predictions ``y_pred`` on unit embeddings ``rows``."""
    cm = confusion_matrix(y_true, y_pred, n_classes)
    clus = clustering_scores(y_true, y_pred)
    present = np.unique(y_true).size
    sil = angular_silhouette(rows, y_true) if present >= 2 else 0.0
    return MetricsRecord(
        binary=binary_metrics(cm, nonvul_class),
        cwe_macro=cwe_macro_metrics(cm, nonvul_class),
        macro_fnr_plus_fpr=macro_fnr_fpr(cm),
        nmi=clus["nmi"],
        ari=clus["ari"],
        angular_silhouette=sil,
    ), cm
