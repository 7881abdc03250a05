"""Run configuration: a flat ``key = value`` text file.

Lines starting with ``#`` are comments. Example::

    schema_version = 1
    # benchmark
    n_classes = 8
    d_embed = 32
    d_ambient = 64
    n_max = 2000
    imbalance_ratio = 50
    kappa_head = 80
    kappa_tail = 5
    noise_sigma = 0.1
    seed = 0
    # training
    epochs = 30
    s0 = 20
    mode = margin

Optional keys and their defaults are listed in ``OPTIONAL``.
"""
import configparser
from dataclasses import dataclass, fields

from .bench import BenchSpec, count_schedule, linear_kappa_schedule
from .errors import ConfigurationError
from .trainer import TrainConfig

SCHEMA_VERSION = 1

REQUIRED = {
    "schema_version": int,
    "n_classes": int,
    "d_embed": int,
    "d_ambient": int,
    "n_max": int,
    "imbalance_ratio": float,
    "kappa_head": float,
    "kappa_tail": float,
    "noise_sigma": float,
    "seed": int,
    "epochs": int,
    "s0": float,
    "mode": str,
}

OPTIONAL = {
    "lift": (str, "random"),
    "batch_size": (int, 64),
    "learning_rate": (float, 0.05),
    "momentum": (float, 0.9),
    "alpha": (float, 0.95),
    "hidden": (int, 0),
    "activation": (str, "identity"),
    "checkpoint_every": (int, 0),
    "nonvul_class": (int, 0),
    "out_dir": (str, "out"),
}


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    n_classes: int
    d_embed: int
    d_ambient: int
    n_max: int
    imbalance_ratio: float
    kappa_head: float
    kappa_tail: float
    noise_sigma: float
    seed: int
    epochs: int
    s0: float
    mode: str
    lift: str = "random"
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    alpha: float = 0.95
    hidden: int = 0
    activation: str = "identity"
    checkpoint_every: int = 0
    nonvul_class: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"expected {SCHEMA_VERSION}, got {self.schema_version}", key="schema_version")
        if self.n_max < 2:
            raise ConfigurationError(f"must be >= 2, got {self.n_max}", key="n_max")
        if self.imbalance_ratio < 1:
            raise ConfigurationError(f"must be >= 1, got {self.imbalance_ratio}", key="imbalance_ratio")
        if self.checkpoint_every < 0:
            raise ConfigurationError(f"must be >= 0, got {self.checkpoint_every}", key="checkpoint_every")
        if not 0 <= self.nonvul_class < self.n_classes:
            raise ConfigurationError(f"must lie in [0, {self.n_classes})", key="nonvul_class")
        # Surface bench/train validation errors at load time.
        self.bench_spec()
        self.train_config()

    def bench_spec(self):
        return BenchSpec(
            n_classes=self.n_classes, d_embed=self.d_embed, d_ambient=self.d_ambient,
            counts=count_schedule(self.n_classes, self.n_max, self.imbalance_ratio),
            kappas=linear_kappa_schedule(self.n_classes, self.kappa_head, self.kappa_tail),
            noise_sigma=self.noise_sigma, seed=self.seed, lift=self.lift,
        )

    def train_config(self):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            momentum=self.momentum, s0=self.s0, alpha=self.alpha, mode=self.mode, seed=self.seed,
            d_embed=self.d_embed, hidden=self.hidden, activation=self.activation,
            nonvul_class=self.nonvul_class,
        )

    def with_overrides(self, **kw):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig(**values)


def _convert(key, raw, typ):
    try:
        return typ(raw)
    except ValueError:
        raise ConfigurationError(f"cannot parse {raw!r} as {typ.__name__}", key=key) from None


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    items = dict(parser["run"])
    known = set(REQUIRED) | set(OPTIONAL)
    for key in items:
        if key not in known:
            raise ConfigurationError("unknown key", key=key)
    values = {}
    for key, typ in REQUIRED.items():
        if key not in items:
            raise ConfigurationError("required key missing", key=key)
        values[key] = _convert(key, items[key].strip(), typ)
    for key, (typ, _default) in OPTIONAL.items():
        if key in items:
            values[key] = _convert(key, items[key].strip(), typ)
    return RunConfig(**values)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def config_text(cfg):
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
