"""Shallow encoder training with per-epoch geometry refresh."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, MissingClassError
from .geometry import build_snapshot, etf_diagnostics, uniform_snapshot
from .losses import cosine_softmax_loss, margin_loss
from .metrics import evaluate
from .prototypes import PrototypeSet, build_prototypes, classify
from .sphere import sample_uniform_sphere
from .vmf import estimate_kappa

log = logging.getLogger(__name__)

MODES = ("margin", "cosine_baseline")
ACTIVATIONS = ("identity", "tanh")


@dataclass
class EncoderParams:
    layers: list
    activation: str = "identity"

    @classmethod
    def init(cls, d_in, d_out, rng, hidden=None, activation="identity"):
        sizes = [d_in] + ([hidden] if hidden else []) + [d_out]
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = rng.uniform(-bound, bound, size=fan_out)
            layers.append((W, b))
        return cls(layers, activation)

    @property
    def d_in(self):
        return self.layers[0][0].shape[1]

    @property
    def d_out(self):
        return self.layers[-1][0].shape[0]

    def _act(self, z):
        return np.tanh(z) if self.activation == "tanh" else z

    def forward(self, x):
        """Raw (unnormalized) embeddings plus the cache needed by ``backward``."""
        h = x
        cache = [h]
        for i, (W, b) in enumerate(self.layers):
            h = h @ W.T + b
            if i < len(self.layers) - 1:
                h = self._act(h)
            cache.append(h)
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        grads = [None] * len(self.layers)
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            W, _ = self.layers[i]
            h_in = cache[i]
            grads[i] = (g.T @ h_in, g.sum(axis=0))
            if i > 0:
                g = g @ W
                if self.activation == "tanh":
                    g = g * (1.0 - cache[i] ** 2)
        return grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    s0: float = 20.0
    alpha: float = 0.95
    mode: str = "margin"
    seed: int = 0
    d_embed: int = 32
    hidden: int = 0
    activation: str = "identity"
    nonvul_class: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"must be >= 1, got {self.epochs}", key="epochs")
        if self.batch_size < 1:
            raise ConfigurationError(f"must be >= 1, got {self.batch_size}", key="batch_size")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"must be > 0, got {self.learning_rate}", key="learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"must lie in [0, 1), got {self.momentum}", key="momentum")
        if not self.s0 > 0:
            raise ConfigurationError(f"must be > 0, got {self.s0}", key="s0")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"must lie in (0, 1), got {self.alpha}", key="alpha")
        if self.mode not in MODES:
            raise ConfigurationError(f"must be one of {MODES}, got {self.mode!r}", key="mode")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"must be one of {ACTIVATIONS}, got {self.activation!r}",
                                     key="activation")
        if self.d_embed < 2:
            raise ConfigurationError(f"must be >= 2, got {self.d_embed}", key="d_embed")


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    train_loss: float
    kappa: np.ndarray
    theta_vmf: np.ndarray
    margin: np.ndarray
    scale: np.ndarray
    metrics: object
    gram_condition: float
    etf_deviation: float


@dataclass
class TrainResult:
    encoder: EncoderParams
    prototypes: PrototypeSet
    traces: list
    snapshot: object
    config: TrainConfig = field(repr=False)


def embed(encoder, x):
    """Unit-norm embeddings of raw inputs ``x``."""
    z = encoder(np.asarray(x, dtype=np.float64))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def refresh_geometry(encoder, x_train, y_train, n_classes, s0, alpha=0.95):
    """Per-class kappa, apex angle, margin and scale from one full forward pass."""
    e = embed(encoder, x_train)
    mus, kappas = [], []
    for c in range(n_classes):
        rows = e[y_train == c]
        if rows.shape[0] == 0:
            raise MissingClassError(c)
        mu, kappa = estimate_kappa(rows, e.shape[1])
        mus.append(mu)
        kappas.append(kappa)
    return build_snapshot(np.array(mus), kappas, e.shape[1], s0, alpha)


def _sgd_step(params, grads, velocity, lr, momentum):
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v -= lr * g
        p += v


def train(dataset, config, epoch_callback=None):
    """Fit encoder and weight prototypes; returns a :class:`TrainResult`.

    ``epoch_callback``, if given, receives the partial result after every
    epoch (used for periodic checkpoints).
    """
    rng = np.random.default_rng(config.seed)
    x_tr, y_tr = dataset.train.x, dataset.train.y
    C = dataset.n_classes
    for c in range(C):
        if not np.any(y_tr == c):
            raise MissingClassError(c)

    encoder = EncoderParams.init(x_tr.shape[1], config.d_embed, rng,
                                 hidden=config.hidden or None, activation=config.activation)
    W = sample_uniform_sphere(config.d_embed, rng, size=C)
    params = [a for layer in encoder.layers for a in layer] + [W]
    velocity = [np.zeros_like(p) for p in params]
    traces = []
    n = x_tr.shape[0]

    for epoch in range(1, config.epochs + 1):
        geometry = refresh_geometry(encoder, x_tr, y_tr, C, config.s0, config.alpha)
        snapshot = geometry if config.mode == "margin" else uniform_snapshot(C, config.s0)
        order = rng.permutation(n)
        loss_sum = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            z, cache = encoder.forward(x_tr[idx])
            if config.mode == "margin":
                ev = margin_loss(z, W, y_tr[idx], snapshot)
            else:
                ev = cosine_softmax_loss(z, W, y_tr[idx], config.s0)
            if not math.isfinite(ev.loss):
                raise DivergenceError(epoch, b, ev.loss)
            loss_sum += ev.loss * idx.size
            enc_grads = encoder.backward(cache, ev.grad_embeddings)
            grads = [g for pair in enc_grads for g in pair] + [ev.grad_prototypes]
            _sgd_step(params, grads, velocity, config.learning_rate, config.momentum)
            W /= np.linalg.norm(W, axis=1, keepdims=True)

        medians, counts = build_prototypes(embed(encoder, x_tr), y_tr, C)
        e_val = embed(encoder, dataset.val.x)
        record, _ = evaluate(dataset.val.y, classify(e_val, medians), e_val, C, config.nonvul_class)
        deviation, cond = etf_diagnostics(medians)
        traces.append(EpochTrace(epoch, loss_sum / n, geometry.kappas, geometry.theta_vmf,
                                 snapshot.margins, snapshot.scales, record, cond, deviation))
        log.info("epoch %d loss %.4f val fnr+fpr %.4f cond %.3f", epoch, loss_sum / n,
                 record.macro_fnr_plus_fpr, cond)
        if epoch_callback is not None:
            epoch_callback(TrainResult(encoder, PrototypeSet(W.copy(), medians, counts),
                                       list(traces), snapshot, config))

    prototypes = PrototypeSet(W.copy(), medians, counts)
    return TrainResult(encoder, prototypes, traces, snapshot, config)
