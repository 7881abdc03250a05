"""Imbalance-aware angular margins on the unit hypersphere.

Per-class concentration (vMF kappa) drives both an additive angular margin
and a logit scale; a Weiszfeld median gives robust class prototypes.
"""
__version__ = "0.1.0"

from .errors import (
    CheckpointError, ConfigurationError, DataParseError, DegenerateInputError, DivergenceError,
    InvariantViolationError, MarginError, MissingClassError, NumericalError, ParameterError,
    ShapeError,
)
from .sphere import EmbeddingBatch, angular_distance, normalize, normalize_rows, sample_uniform_sphere
from .vmf import (
    ConfidenceCone, VmfParams, apex_angle_approx, apex_angle_exact, confidence_cone,
    estimate_kappa, log_normalizer, sample_vmf,
)
from .geometry import (
    ClassGeometry, GeometrySnapshot, adaptive_margin, build_snapshot, concentration_scales,
    etf_diagnostics, voronoi_apex_angle,
)
from .losses import LossEvaluation, cosine_softmax_loss, finite_difference_check, margin_loss
from .prototypes import PrototypeSet, build_prototypes, classify, geometric_median
from .metrics import MetricsRecord, evaluate
from .bench import BenchSpec, Dataset, count_schedule, generate, linear_kappa_schedule
from .trainer import EpochTrace, TrainConfig, TrainResult, train

__all__ = [name for name in dir() if not name.startswith("_")]
