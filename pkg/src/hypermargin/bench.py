"""Synthetic long-tailed, difficulty-imbalanced classification problems.

Each class is a vMF cluster on S^{d_embed-1}; head classes have many
samples and high concentration, tail classes few samples and low
concentration. Samples are lifted into ``d_ambient`` dimensions by a fixed
random linear map plus Gaussian noise, so an encoder has to learn the way
back. Class 0 is the head class and plays the role of Non-Vul.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import voronoi_apex_angle
from .sphere import sample_uniform_sphere
from .vmf import KAPPA_MAX, KAPPA_MIN, VmfParams, sample_vmf

MAX_DIRECTION_TRIES = 10_000


def count_schedule(n_classes, n_max, ratio):
    """Geometric long tail ``round(n_max * ratio^(-c/(C-1)))``, floored at 2."""
    if ratio < 1:
        raise ConfigurationError(f"must be >= 1, got {ratio}", key="imbalance_ratio")
    if n_classes == 1:
        return [max(int(n_max), 2)]
    return [max(int(round(n_max * ratio ** (-c / (n_classes - 1)))), 2) for c in range(n_classes)]


def linear_kappa_schedule(n_classes, head, tail):
    if n_classes == 1:
        return [float(head)]
    return [float(head + (tail - head) * c / (n_classes - 1)) for c in range(n_classes)]


@dataclass(frozen=True)
class BenchSpec:
    n_classes: int
    d_embed: int
    d_ambient: int
    counts: tuple
    kappas: tuple
    noise_sigma: float = 0.0
    seed: int = 0
    lift: str = "random"

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "kappas", tuple(float(k) for k in self.kappas))
        if self.n_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {self.n_classes}", key="n_classes")
        if self.d_embed < 2:
            raise ConfigurationError(f"must be >= 2, got {self.d_embed}", key="d_embed")
        if self.d_ambient < self.d_embed:
            raise ConfigurationError(
                f"must be >= d_embed ({self.d_embed}), got {self.d_ambient}", key="d_ambient"
            )
        if len(self.counts) != self.n_classes or min(self.counts) < 2:
            raise ConfigurationError("need one count >= 2 per class", key="counts")
        if len(self.kappas) != self.n_classes or not all(
            KAPPA_MIN <= k <= KAPPA_MAX for k in self.kappas
        ):
            raise ConfigurationError(f"need one kappa in [{KAPPA_MIN}, {KAPPA_MAX}] per class", key="kappas")
        if self.noise_sigma < 0:
            raise ConfigurationError(f"must be >= 0, got {self.noise_sigma}", key="noise_sigma")
        if self.lift not in ("random", "identity"):
            raise ConfigurationError(f"must be 'random' or 'identity', got {self.lift!r}", key="lift")
        if self.lift == "identity" and self.d_ambient != self.d_embed:
            raise ConfigurationError("identity lift requires d_ambient == d_embed", key="lift")

    @property
    def imbalance_ratio(self):
        return max(self.counts) / min(self.counts)


@dataclass(frozen=True)
class Split:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class Dataset:
    train: Split
    val: Split
    test: Split
    directions: np.ndarray
    kappas: np.ndarray
    lift: np.ndarray = field(repr=False)

    @property
    def n_classes(self):
        return self.directions.shape[0]

    def split(self, name):
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def split_sizes(n):
    """8:1:1 split of ``n`` samples, rounding toward train."""
    held = n // 10
    return n - 2 * held, held, held


def planted_directions(n_classes, d, rng, min_angle):
    dirs = []
    for _ in range(MAX_DIRECTION_TRIES):
        cand = sample_uniform_sphere(d, rng)
        if all(math.acos(min(max(float(cand @ p), -1.0), 1.0)) >= min_angle for p in dirs):
            dirs.append(cand)
            if len(dirs) == n_classes:
                return np.array(dirs)
    raise ConfigurationError(
        f"could not place {n_classes} directions {min_angle:.3f} rad apart on S^{d - 1} "
        f"within {MAX_DIRECTION_TRIES} tries; increase d_embed",
        key="d_embed",
    )


def generate(spec):
    """Draw a dataset for ``spec``; the same spec always yields identical arrays."""
    rng = np.random.default_rng(spec.seed)
    C = spec.n_classes
    dirs = planted_directions(C, spec.d_embed, rng, 0.5 * voronoi_apex_angle(C))
    if spec.lift == "identity":
        lift = np.eye(spec.d_embed)
    else:
        lift = rng.standard_normal((spec.d_ambient, spec.d_embed)) / math.sqrt(spec.d_embed)

    parts = {"train": ([], []), "val": ([], []), "test": ([], [])}
    for c in range(C):
        z = sample_vmf(VmfParams(dirs[c], spec.kappas[c]), spec.counts[c], rng)
        x = z @ lift.T
        if spec.noise_sigma > 0:
            x = x + spec.noise_sigma * rng.standard_normal(x.shape)
        order = rng.permutation(x.shape[0])
        n_tr, n_va, _ = split_sizes(x.shape[0])
        for name, sl in (("train", order[:n_tr]), ("val", order[n_tr:n_tr + n_va]),
                         ("test", order[n_tr + n_va:])):
            parts[name][0].append(x[sl])
            parts[name][1].append(np.full(sl.size, c, dtype=np.int64))

    splits = {name: Split(np.concatenate(xs), np.concatenate(ys)) for name, (xs, ys) in parts.items()}
    return Dataset(splits["train"], splits["val"], splits["test"], dirs,
                   np.array(spec.kappas), lift)
