"""File formats: embedding CSV, trace CSV, JSON report, binary checkpoint.

Checkpoint layout (little-endian)::

    b"MRGN" | u32 version | section*6

Each section is ``u64 byte_length`` followed by its payload, in this order:
encoder, weight prototypes, median prototypes, geometry snapshot, seed,
epoch count. Matrices are ``u32 rows, u32 cols`` then row-major float64.
"""
import csv
import io
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, DataParseError
from .trainer import EncoderParams

MAGIC = b"MRGN"
CHECKPOINT_VERSION = 1
_ACTIVATION_CODES = {"identity": 0, "tanh": 1}


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temp file so readers never see a partial file."""
    path = os.fspath(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return format(float(x), ".17g")


# -- embedding CSV ---------------------------------------------------------

def embeddings_csv_text(x, y):
    x = np.asarray(x, dtype=np.float64)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label"] + [f"e{j}" for j in range(x.shape[1])])
    for label, row in zip(np.asarray(y), x):
        w.writerow([str(int(label))] + [_fmt(v) for v in row])
    return buf.getvalue()


def write_embeddings_csv(path, x, y):
    atomic_write(path, embeddings_csv_text(x, y))


def read_embeddings_csv(path):
    """Parse an embedding CSV into ``(x, y)``; errors name file, line and column."""
    path = os.fspath(path)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataParseError(path, 1, 1, "empty file") from None
        if not header or header[0].strip() != "label":
            raise DataParseError(path, 1, 1, "header must start with 'label'")
        for j, name in enumerate(header[1:]):
            if name.strip() != f"e{j}":
                raise DataParseError(path, 1, j + 2, f"expected column 'e{j}', got {name!r}")
        d = len(header) - 1
        if d < 1:
            raise DataParseError(path, 1, 2, "no embedding columns")
        labels, rows = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != d + 1:
                raise DataParseError(path, line, min(len(row), d + 1) + 1,
                                     f"expected {d + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise DataParseError(path, line, 1, f"label {row[0]!r} is not an integer") from None
            if label < 0:
                raise DataParseError(path, line, 1, f"negative label {label}")
            vals = []
            for j, cell in enumerate(row[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataParseError(path, line, j + 2, f"{cell!r} is not a number") from None
                if not math.isfinite(v):
                    raise DataParseError(path, line, j + 2, f"non-finite value {cell!r}")
                vals.append(v)
            labels.append(label)
            rows.append(vals)
    if not rows:
        raise DataParseError(path, 2, 1, "no data rows")
    return np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64)


# -- trace CSV ---------------------------------------------------------------

TRACE_COLUMNS = (
    "epoch", "train_loss", "val_binary_mcc", "val_binary_f1", "val_macro_mcc", "val_macro_f1",
    "val_macro_fnr_fpr", "nmi", "ari", "angular_silhouette", "gram_condition", "etf_deviation",
)


def trace_header(n_classes):
    cols = list(TRACE_COLUMNS)
    for block in ("kappa", "theta_vmf", "margin", "scale"):
        cols += [f"{block}_{c}" for c in range(n_classes)]
    return cols


def trace_csv_text(traces, n_classes):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(n_classes))
    for t in traces:
        m = t.metrics
        row = [str(t.epoch)] + [_fmt(v) for v in (
            t.train_loss, m.binary.mcc, m.binary.f1, m.cwe_macro.mcc, m.cwe_macro.f1,
            m.macro_fnr_plus_fpr, m.nmi, m.ari, m.angular_silhouette,
            t.gram_condition, t.etf_deviation)]
        for block in (t.kappa, t.theta_vmf, t.margin, t.scale):
            row += [_fmt(v) for v in block]
        w.writerow(row)
    return buf.getvalue()


# -- evaluation report -----------------------------------------------------

def report_dict(record, cm):
    return {
        "binary": vars(record.binary).copy(),
        "cwe_macro": vars(record.cwe_macro).copy(),
        "distortion_proxy": {"macro_fnr_plus_fpr": record.macro_fnr_plus_fpr},
        "clustering": {"nmi": record.nmi, "ari": record.ari,
                       "angular_silhouette": record.angular_silhouette},
        "confusion_matrix": np.asarray(cm).astype(int).tolist(),
    }


def report_text(record, cm):
    return json.dumps(report_dict(record, cm), indent=2) + "\n"


# -- checkpoint --------------------------------------------------------------

@dataclass(frozen=True)
class Checkpoint:
    encoder: EncoderParams
    weight_prototypes: np.ndarray
    median_prototypes: np.ndarray
    theta_cell: float
    theta_vmf_min: float
    s0: float
    alpha: float
    kappas: np.ndarray
    theta_vmf: np.ndarray
    margins: np.ndarray
    scales: np.ndarray
    seed: int
    epochs: int

    @property
    def n_classes(self):
        return self.median_prototypes.shape[0]


def _matrix_bytes(m):
    m = np.ascontiguousarray(m, dtype="<f8")
    return struct.pack("<II", *m.shape) + m.tobytes()


def checkpoint_bytes(ckpt):
    enc = ckpt.encoder
    parts = [struct.pack("<II", len(enc.layers), _ACTIVATION_CODES[enc.activation])]
    for W, b in enc.layers:
        parts.append(_matrix_bytes(W))
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    snap = np.column_stack([ckpt.kappas, ckpt.theta_vmf, ckpt.margins, ckpt.scales])
    sections = [
        b"".join(parts),
        _matrix_bytes(ckpt.weight_prototypes),
        _matrix_bytes(ckpt.median_prototypes),
        struct.pack("<4d", ckpt.theta_cell, ckpt.theta_vmf_min, ckpt.s0, ckpt.alpha)
        + _matrix_bytes(snap),
        struct.pack("<q", ckpt.seed),
        struct.pack("<I", ckpt.epochs),
    ]
    out = [MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    for s in sections:
        out.append(struct.pack("<Q", len(s)))
        out.append(s)
    return b"".join(out)


def checkpoint_from_result(result):
    snap = result.snapshot
    return Checkpoint(
        encoder=result.encoder,
        weight_prototypes=result.prototypes.weight_prototypes,
        median_prototypes=result.prototypes.median_prototypes,
        theta_cell=snap.theta_cell, theta_vmf_min=snap.theta_vmf_min,
        s0=snap.s0, alpha=snap.alpha,
        kappas=snap.kappas, theta_vmf=snap.theta_vmf,
        margins=snap.margins, scales=snap.scales,
        seed=result.config.seed, epochs=len(result.traces),
    )


def save_checkpoint(path, ckpt):
    atomic_write(path, checkpoint_bytes(ckpt))


class _Reader:
    def __init__(self, data, what):
        self.data, self.pos, self.what = data, 0, what

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated {self.what}: need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self):
        r, c = self.unpack("<II")
        return np.frombuffer(self.take(8 * r * c), dtype="<f8").reshape(r, c).astype(np.float64)

    def vector(self, n):
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.data):
            raise CheckpointError(f"{len(self.data) - self.pos} trailing bytes in {self.what}")


def parse_checkpoint(data):
    outer = _Reader(data, "checkpoint")
    if outer.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = outer.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    names = ("encoder", "weight prototypes", "median prototypes", "snapshot", "seed", "epochs")
    sections = {}
    for name in names:
        (length,) = outer.unpack("<Q")
        sections[name] = _Reader(outer.take(length), f"{name} section")
    outer.done()

    r = sections["encoder"]
    n_layers, act = r.unpack("<II")
    codes = {v: k for k, v in _ACTIVATION_CODES.items()}
    if act not in codes or n_layers < 1:
        raise CheckpointError("corrupt encoder section")
    layers = []
    for _ in range(n_layers):
        W = r.matrix()
        layers.append((W, r.vector(W.shape[0])))
    r.done()
    encoder = EncoderParams(layers, codes[act])

    weights = sections["weight prototypes"].matrix()
    sections["weight prototypes"].done()
    medians = sections["median prototypes"].matrix()
    sections["median prototypes"].done()
    r = sections["snapshot"]
    theta_cell, theta_min, s0, alpha = r.unpack("<4d")
    snap = r.matrix()
    r.done()
    (seed,) = sections["seed"].unpack("<q")
    sections["seed"].done()
    (epochs,) = sections["epochs"].unpack("<I")
    sections["epochs"].done()

    C = medians.shape[0]
    if weights.shape != medians.shape or snap.shape != (C, 4) or encoder.d_out != medians.shape[1]:
        raise CheckpointError("inconsistent shapes between checkpoint sections")
    return Checkpoint(encoder, weights, medians, theta_cell, theta_min, s0, alpha,
                      snap[:, 0].copy(), snap[:, 1].copy(), snap[:, 2].copy(), snap[:, 3].copy(),
                      seed, epochs)


def load_checkpoint(path):
    with open(path, "rb") as f:
        return parse_checkpoint(f.read())
