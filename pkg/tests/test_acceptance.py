"""Acceptance criteria, one test each.

Every test records a ``criterion N PASS|FAIL`` line; ``conftest.py`` prints
them after the run. ``python tests/test_acceptance.py`` runs the same checks
without pytest.
"""
import math
import os
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
import oracles  # noqa: E402

from hypermargin.bench import BenchSpec, count_schedule, generate, linear_kappa_schedule
from hypermargin.cli import main as cli_main
from hypermargin.geometry import concentration_scales, uniform_snapshot
from hypermargin.losses import (
    cosine_softmax_loss, finite_difference_check, margin_loss, margin_loss_arrays,
)
from hypermargin.metrics import (
    binary_metrics, clustering_scores, cwe_macro_metrics, macro_fnr_fpr,
)
from hypermargin.prototypes import geometric_median, weiszfeld_iterates, weiszfeld_objective
from hypermargin.sphere import normalize
from hypermargin.trainer import TrainConfig, train
from hypermargin.vmf import VmfParams, apex_angle_approx, apex_angle_exact, estimate_kappa, sample_vmf

RESULTS = []
BENCH_SEEDS = range(5)


def record(n, ok, detail):
    RESULTS.append(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# -- 1 --------------------------------------------------------------------

def test_criterion_01_kappa_round_trip():
    rng = np.random.default_rng(1)
    mu = normalize(rng.standard_normal(64))
    t0 = time.perf_counter()
    _, k = estimate_kappa(sample_vmf(VmfParams(mu, 200.0), 20_000, rng), 64)
    dt = time.perf_counter() - t0
    rel = abs(k - 200) / 200
    record(1, rel <= 0.05 and dt < 2.0, f"kappa 200 -> {k:.2f} (rel {rel:.4f} <= 0.05), {dt:.3f}s < 2s")


# -- 2 --------------------------------------------------------------------

def test_criterion_02_apex_consistency():
    worst, parts = 0.0, []
    for d in (16, 64):
        for k in (100.0, 1000.0):
            a, x = apex_angle_approx(k, d, 0.95), apex_angle_exact(k, d, 0.95)
            rel = abs(a - x) / x
            worst = max(worst, rel)
            parts.append(f"d={d},k={k:g}:{rel:.4f}")
    record(2, worst < 0.05, f"max rel error {worst:.4f} < 0.05 [{' '.join(parts)}]")


# -- 3 --------------------------------------------------------------------

def gradient_configs(seed, count=100):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, d, C = int(rng.integers(1, 9)), int(rng.integers(2, 17)), int(rng.integers(2, 6))
        E, W = rng.standard_normal((n, d)), rng.standard_normal((C, d))
        y = rng.integers(0, C, n)
        yield E, W, y, float(rng.uniform(0.5, 4.0)), rng.uniform(0.5, 4.0, C), rng.uniform(0.0, 2.5, C)


def test_criterion_03_gradients():
    worst_cos = worst_margin = 0.0
    clamped = 0
    for E, W, y, s0, scales, margins in gradient_configs(3):
        worst_cos = max(worst_cos, finite_difference_check(
            lambda e, w: cosine_softmax_loss(e, w, y, s0), E, W))
        worst_margin = max(worst_margin, finite_difference_check(
            lambda e, w: margin_loss_arrays(e, w, y, scales, margins), E, W))
        cos = np.sum(normalize_rows_safe(E) * normalize_rows_safe(W)[y], axis=1)
        clamped += bool(np.any(np.arccos(np.clip(cos, -1, 1)) + margins[y] > math.pi))
    ok = worst_cos < 1e-4 and worst_margin < 1e-4 and clamped > 0
    record(3, ok, f"max rel error cosine {worst_cos:.2e}, margin {worst_margin:.2e} (< 1e-4); "
                  f"{clamped}/100 configs with active clamp")


def normalize_rows_safe(m):
    return m / np.linalg.norm(m, axis=1, keepdims=True)


# -- 4 --------------------------------------------------------------------

def test_criterion_04_reduction():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        n, d, C = int(rng.integers(1, 17)), int(rng.integers(2, 33)), int(rng.integers(2, 11))
        E, W, y = rng.standard_normal((n, d)), rng.standard_normal((C, d)), rng.integers(0, C, n)
        s0 = float(rng.uniform(1, 64))
        a = margin_loss(E, W, y, uniform_snapshot(C, s0)).loss
        b = cosine_softmax_loss(E, W, y, s0).loss
        worst = max(worst, abs(a - b))
    record(4, worst <= 1e-12, f"max |margin - cosine| = {worst:.2e} <= 1e-12 over 100 inputs")


# -- 5, 6 -----------------------------------------------------------------

def benchmark_spec(seed):
    C = 8
    return BenchSpec(C, 32, 64, count_schedule(C, 2000, 50), linear_kappa_schedule(C, 80, 5),
                     noise_sigma=0.1, seed=seed)


@lru_cache(maxsize=None)
def benchmark_runs():
    t0 = time.perf_counter()
    runs = {}
    for seed in BENCH_SEEDS:
        ds = generate(benchmark_spec(seed))
        for mode in ("margin", "cosine_baseline"):
            runs[seed, mode] = train(ds, TrainConfig(epochs=30, s0=20, mode=mode, seed=seed)).traces
    return runs, time.perf_counter() - t0


def test_criterion_05_dual_imbalance_benchmark():
    runs, elapsed = benchmark_runs()
    m = np.array([runs[s, "margin"][-1].metrics.macro_fnr_plus_fpr for s in BENCH_SEEDS])
    b = np.array([runs[s, "cosine_baseline"][-1].metrics.macro_fnr_plus_fpr for s in BENCH_SEEDS])
    wins = int(np.sum(m < b))
    improvement = 1 - m.mean() / b.mean()
    per_seed = " ".join(f"{x:.3f}/{y:.3f}" for x, y in zip(m, b))
    ok = wins >= 4 and improvement >= 0.10 and elapsed < 300
    record(5, ok, f"margin wins {wins}/5 (>= 4), mean improvement {improvement:.1%} (>= 10%), "
                  f"{elapsed:.1f}s < 300s [margin/baseline {per_seed}]")


def test_criterion_06_etf_dynamics():
    runs, _ = benchmark_runs()
    ratios, dev_down = [], []
    for s in BENCH_SEEDS:
        tr = runs[s, "margin"]
        ratios.append(tr[-1].gram_condition / tr[0].gram_condition)
        dev_down.append(tr[-1].etf_deviation < tr[0].etf_deviation)
    ok = all(r <= 0.1 for r in ratios) and all(dev_down)
    record(6, ok, f"gram_condition final/epoch1 per seed {' '.join(f'{r:.3f}' for r in ratios)} "
                  f"(all <= 0.1 required); etf_deviation decreased on {sum(dev_down)}/5")


# -- 7 --------------------------------------------------------------------

CIRCLE_ANGLES = np.array([0.0, 0.3, 1.0, 1.1, 2.5])


def polar_grid_median_angle(points, step=1e-4, iters=80):
    """Direction of the Euclidean median by brute force: every grid angle, radius by golden section."""
    phi = np.arange(-math.pi, math.pi, step)
    u = np.column_stack([np.cos(phi), np.sin(phi)])

    def f(r):
        diff = points[None, :, :] - r[:, None, None] * u[:, None, :]
        return np.linalg.norm(diff, axis=2).sum(axis=1)

    lo, hi = np.zeros(phi.size), np.ones(phi.size)
    g = (math.sqrt(5) - 1) / 2
    for _ in range(iters):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        left = f(a) < f(b)
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
    return float(phi[np.argmin(f((lo + hi) / 2))])


def test_criterion_07_weiszfeld():
    pts = np.column_stack([np.cos(CIRCLE_ANGLES), np.sin(CIRCLE_ANGLES)])
    m = geometric_median(pts)
    got = math.atan2(m[1], m[0])
    ref = polar_grid_median_angle(pts)
    objective = [weiszfeld_objective(y, pts) for y in weiszfeld_iterates(pts)]
    steps_ok = all(b <= a * (1 + 1e-14) for a, b in zip(objective, objective[1:]))
    err = abs(got - ref)
    record(7, err < 1e-3 and steps_ok,
           f"median angle {got:.5f} vs grid {ref:.5f} (diff {err:.1e} < 1e-3); "
           f"objective non-increasing over {len(objective) - 1} iterations: {steps_ok}")


# -- 8 --------------------------------------------------------------------

def test_criterion_08_scaling_contract():
    from fractions import Fraction

    rng = np.random.default_rng(8)
    worst_mean, all_reversed = 0.0, True
    for _ in range(500):
        C = int(rng.integers(2, 30))
        kappas = np.exp(rng.uniform(math.log(1e-3), math.log(1e6), C))
        if np.unique(kappas).size < C:
            continue
        s0 = float(rng.uniform(0.1, 100))
        s = concentration_scales(kappas, s0)
        worst_mean = max(worst_mean, abs(s.mean() / s0 - 1))
        rs, rk = np.argsort(np.argsort(s)), np.argsort(np.argsort(kappas))
        rho = 1 - Fraction(6 * int(((rs - rk) ** 2).sum()), C * (C * C - 1))
        all_reversed &= np.unique(s).size == C and rho == -1
    record(8, worst_mean <= 1e-9 and all_reversed,
           f"max |mean(s)/s0 - 1| = {worst_mean:.1e} <= 1e-9; Spearman exactly -1 on all 500: {all_reversed}")


# -- 9 --------------------------------------------------------------------

def test_criterion_09_metric_oracles():
    rng = np.random.default_rng(9)
    worst = 0.0

    def diff(a, b):
        return max(abs(a[k] - b[k]) for k in b)

    for _ in range(50):
        C = int(rng.integers(2, 8))
        cm = rng.integers(0, 15, (C, C))
        cm[rng.random((C, C)) < 0.3] = 0
        nv = int(rng.integers(0, C))
        worst = max(worst, diff(vars(binary_metrics(cm, nv)), oracles.binary(cm.tolist(), nv)))
        worst = max(worst, diff(vars(cwe_macro_metrics(cm, nv)), oracles.cwe_macro(cm.tolist(), nv)))
        worst = max(worst, abs(macro_fnr_fpr(cm) - oracles.fnr_fpr(cm.tolist())))
        n = int(rng.integers(1, 40))
        a = rng.integers(0, int(rng.integers(1, 6)), n)
        b = rng.integers(0, int(rng.integers(1, 6)), n)
        got = clustering_scores(a, b)
        worst = max(worst, abs(got["nmi"] - oracles.nmi(a.tolist(), b.tolist())),
                    abs(got["ari"] - oracles.ari(a.tolist(), b.tolist())))
    record(9, worst <= 1e-12, f"max deviation from brute-force oracles {worst:.1e} <= 1e-12 over 50 cases")


# -- 10 -------------------------------------------------------------------

def test_criterion_10_determinism_and_persistence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "schema_version = 1\nn_classes = 8\nd_embed = 32\nd_ambient = 64\nn_max = 2000\n"
        "imbalance_ratio = 50\nkappa_head = 80\nkappa_tail = 5\nnoise_sigma = 0.1\nseed = 0\n"
        "epochs = 30\ns0 = 20\nmode = margin\n")
    run = lambda *a: cli_main([str(x) for x in a])
    codes = [run("--config", cfg, "gen", "--out", tmp_path / "data")]
    for name in ("a", "b"):
        codes.append(run("--config", cfg, "train", "--data", tmp_path / "data", "--out", tmp_path / name))
    same_trace = (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    same_ckpt = (tmp_path / "a" / "checkpoint.mrgn").read_bytes() == (tmp_path / "b" / "checkpoint.mrgn").read_bytes()

    # In-memory report from the trained result vs report after save -> load.
    from hypermargin.cli import evaluate_checkpoint
    from hypermargin.storage import checkpoint_from_result, load_checkpoint, read_embeddings_csv
    from hypermargin.config import load_config
    from hypermargin.bench import Dataset, Split

    conf = load_config(cfg)
    splits = [Split(*read_embeddings_csv(tmp_path / "data" / f"{s}.csv")) for s in ("train", "val", "test")]
    ds = Dataset(*splits, np.zeros((8, 32)), np.zeros(8), np.zeros((64, 32)))
    live = checkpoint_from_result(train(ds, conf.train_config()))
    x, y = splits[2].x, splits[2].y
    before = evaluate_checkpoint(live, x, y)
    after = evaluate_checkpoint(load_checkpoint(tmp_path / "a" / "checkpoint.mrgn"), x, y)
    codes.append(run("eval", "--checkpoint", tmp_path / "a" / "checkpoint.mrgn",
                     "--data", tmp_path / "data", "--out", tmp_path / "rep"))
    cli_report = (tmp_path / "rep" / "report.json").read_text()
    ok = codes == [0, 0, 0, 0] and same_trace and same_ckpt and before == after == cli_report
    record(10, ok, f"trace identical: {same_trace}, checkpoint identical: {same_ckpt}, "
                   f"report identical after round trip: {before == after == cli_report}")


if __name__ == "__main__":
    import tempfile

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    from pathlib import Path
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
    sys.exit(0 if all(" PASS" in r for r in RESULTS) else 1)
