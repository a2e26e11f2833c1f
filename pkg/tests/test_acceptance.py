"""Exit criteria: one test per criterion, each reporting a PASS/FAIL line."""

import inspect
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gradcheck import max_relative_error
from protoadapt import engine as eng
from protoadapt.cli import TIMING_KEYS, main
from protoadapt.engine import StrategyConfig, init_engine
from protoadapt.experiments import ablation, evaluate, prepare_benchmark
from protoadapt.memory_bank import MemoryBank
from protoadapt.metrics import auc, eer
from test_memory_bank import _brute_force_nearest
from test_metrics import pair_count_auc, sweep_eer

SEEDS = range(5)


def report(number: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


@pytest.fixture(scope="module")
def benchmarks():
    return {s: prepare_benchmark(seed=s) for s in SEEDS}


def mean_auc(benchmarks, **overrides) -> float:
    return float(np.mean([evaluate(StrategyConfig(seed=s, **overrides), b.weights, b.target).auc
                          for s, b in benchmarks.items()]))


def test_1_gradient_correctness():
    t0 = time.perf_counter()
    errors = [max_relative_error(seed) for seed in range(120)]
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    report(1, "gradient vs finite differences", worst < 1e-4 and elapsed < 30,
           f"120 configs, max rel err {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 30s)")


def test_2_metric_oracles():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_auc = worst_eer = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        s = rng.random(n) if rng.random() < 0.5 else rng.integers(0, 6, size=n) / 5
        worst_auc = max(worst_auc, abs(auc(s, y) - pair_count_auc(s.tolist(), y.tolist())))
        worst_eer = max(worst_eer, abs(eer(s, y) - sweep_eer(s.tolist(), y.tolist())))
    elapsed = time.perf_counter() - t0
    report(2, "AUC/EER oracle equivalence", worst_auc <= 1e-12 and worst_eer <= 1e-9 and elapsed < 10,
           f"1000 instances, max |dAUC| {worst_auc:.1e} (<= 1e-12), max |dEER| {worst_eer:.1e} (<= 1e-9), "
           f"{elapsed:.1f}s (< 10s)")


def test_3_knn_oracle():
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(200):
        n, d = int(rng.integers(1, 501)), int(rng.integers(1, 9))
        bank = MemoryBank(d, 2, 1000)
        bank.insert_batch(rng.normal(size=(n, d)), rng.normal(size=(n, 2)))
        q = rng.normal(size=d)
        n_f = int(rng.integers(0, 40))
        excl = int(rng.integers(-1, n))
        if bank.nearest(q, n_f, exclude_id=excl).ids != _brute_force_nearest(bank, q, n_f, excl):
            mismatches += 1
    report(3, "kNN oracle equivalence", mismatches == 0, f"200 banks, {mismatches} mismatched id lists")


def test_4_reduction_equivalence(benchmarks):
    reduced = StrategyConfig(strategy="ours", enable_lcpc_training=False, enable_nfc=False,
                             identity_transform=True)
    worst = 0.0
    streams = [(b.weights, b.target) for b in benchmarks.values()]
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = rng.normal(size=(2, 7))
        x = rng.normal(size=(150, 7)) + rng.normal(size=7)
        streams.append((w, eng_stream(x, w)))
    for w, stream in streams:
        a = evaluate(reduced, w, stream).scores
        b = evaluate(StrategyConfig(strategy="prototype_only"), w, stream).scores
        worst = max(worst, float(np.abs(a - b).max()))
    report(4, "ours(reduced) == prototype_only", worst <= 1e-9, f"{len(streams)} streams, max |diff| {worst:.1e}")


def eng_stream(x, w):
    from protoadapt.data_io import StreamData
    return StreamData.from_arrays(x, x @ w.T)


def test_5_benchmark_ordering(benchmarks):
    t0 = time.perf_counter()
    ours = mean_auc(benchmarks, strategy="ours")
    base = mean_auc(benchmarks, strategy="no_adapt")
    proto = mean_auc(benchmarks, strategy="prototype_only")
    elapsed = time.perf_counter() - t0
    ok = ours >= base + 0.03 and ours >= proto - 0.005 and elapsed < 120
    report(5, "synthetic benchmark ordering", ok,
           f"AUC ours {ours:.4f}, no_adapt {base:.4f} (need +0.03), prototype_only {proto:.4f} "
           f"(need -0.005), {elapsed:.1f}s (< 120s)")


def test_6_ablation_ordering(benchmarks):
    per_id = {1: [], 2: [], 3: [], 4: []}
    for s, b in benchmarks.items():
        for row in ablation(b.weights, b.target, StrategyConfig(), [s]):
            per_id[row["id"]].append(row["auc_mean"])
    m = {k: float(np.mean(v)) for k, v in per_id.items()}
    ok = m[4] >= m[1] + 0.03 and m[4] >= m[2] - 0.01 and m[4] >= m[3] - 0.01
    report(6, "ablation ordering", ok,
           f"full {m[4]:.4f}, baseline {m[1]:.4f} (need +0.03), LCPC-only {m[2]:.4f}, NFC-only {m[3]:.4f} "
           f"(need -0.01)")


def test_7_step_count_trend(benchmarks):
    times, aucs = {}, {}
    for k in (1, 2, 3):
        reps = [evaluate(StrategyConfig(seed=s, k_s=k), b.weights, b.target) for s, b in benchmarks.items()]
        times[k] = float(np.mean([np.mean(r.batch_times) for r in reps]))
        aucs[k] = float(np.mean([r.auc for r in reps]))
    ok = times[1] < times[2] < times[3] and aucs[3] >= aucs[1] - 0.01
    report(7, "K_s time/AUC trend", ok,
           "batch ms " + " < ".join(f"{times[k] * 1e3:.2f}" for k in (1, 2, 3))
           + f", AUC K_s=1 {aucs[1]:.4f}, K_s=3 {aucs[3]:.4f}")


def test_8_cli_determinism(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "d"), "--seed", "8"]) == 0
    assert main(["train-base", "--source", str(tmp_path / "d" / "source.fts"), "--out", str(tmp_path / "w.ftw"),
                 "--seed", "8", "--target", str(tmp_path / "d" / "target.fts")]) == 0
    args = ["run", "--stream", str(tmp_path / "target_scored.fts"), "--weights", str(tmp_path / "w.ftw"),
            "--seed", "8", "--out", str(tmp_path / "r")]
    snapshots = []
    for _ in range(2):
        assert main(args) == 0
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        snapshots.append(((tmp_path / "r" / "scores.csv").read_bytes(),
                          {k: v for k, v in manifest.items() if k not in TIMING_KEYS}))
    same_scores = snapshots[0][0] == snapshots[1][0]
    same_manifest = snapshots[0][1] == snapshots[1][1]
    report(8, "CLI determinism", same_scores and same_manifest,
           f"scores identical: {same_scores}, manifests identical modulo timing: {same_manifest}")


def test_9_structural_invariants(benchmarks):
    b = benchmarks[0]
    cfg = StrategyConfig(seed=0)
    e = init_engine(b.weights, cfg)
    f, lg = b.target.features, b.target.logits
    bank_ok = dist_ok = True
    for start in range(0, len(f), cfg.batch_size):
        preds = e.process_batch(f[start:start + cfg.batch_size], lg[start:start + cfg.batch_size])
        bank_ok &= len(e.bank) <= cfg.n_m and set(e.bank.pred_classes.tolist()) == {0, 1}
        for p in preds:
            for dist in (p.raw, p.calibrated):
                dist_ok &= bool(abs(dist.sum() - 1) <= 1e-9 and (dist >= 0).all() and (dist <= 1).all())

    full = evaluate(cfg, b.weights, b.target).scores
    prefix_stream = replace(b.target, features=f[:640], logits=lg[:640], labels=b.target.labels[:640])
    causal = np.array_equal(evaluate(cfg, b.weights, prefix_stream).scores, full[:640])

    stripped = replace(b.target, labels=np.full(len(f), -1))
    blind_run = np.array_equal(evaluate(cfg, b.weights, stripped).scores, full)
    blind_sig = all(list(inspect.signature(c.process_batch).parameters) == ["self", "features", "logits"]
                    for c in (eng.NoAdapt, eng.PrototypeOnly, eng.PseudoLabel, eng.AdaptationEngine))
    ok = bank_ok and dist_ok and causal and blind_run and blind_sig
    report(9, "structural invariants", ok,
           f"bank {bank_ok}, ProbDist {dist_ok}, causality {causal}, label-blind run {blind_run}, "
           f"label-free API {blind_sig}")
