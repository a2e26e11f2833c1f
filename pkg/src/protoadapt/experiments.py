"""Benchmark preparation, strategy comparison and the component ablation grid."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data_io import SynthConfig, generate_synthetic, train_base_detector
from .data_io.streams import StreamData
from .engine import EvaluationReport, StrategyConfig, run_stream

# (id, uses LCPC, uses NFC, config overrides)
ABLATION_VARIANTS = (
    (1, False, False, dict(strategy="no_adapt")),
    (2, True, False, dict(strategy="ours", enable_nfc=False)),
    (3, False, True, dict(strategy="ours", identity_transform=True, enable_lcpc_training=False)),
    (4, True, True, dict(strategy="ours")),
)


@dataclass
class Benchmark:
    weights: np.ndarray
    target: StreamData
    source_train_acc: float


def prepare_benchmark(seed: int = 0, synth: SynthConfig | None = None, epochs: int = 300,
                      lr: float = 0.5) -> Benchmark:
    cfg = replace(synth, seed=seed) if synth is not None else SynthConfig(seed=seed)
    data = generate_synthetic(cfg)
    det = train_base_detector(data.source_x, data.source_y, epochs=epochs, lr=lr, seed=seed)
    acc = float(np.mean(np.argmax(det.logits(det.extract(data.source_x)), axis=1) == data.source_y))
    return Benchmark(det.weights, det.to_stream(data.target_x, data.target_y), acc)


def evaluate(config: StrategyConfig, weights, stream: StreamData) -> EvaluationReport:
    labels = stream.labels if stream.has_labels else None
    return run_stream(config, weights, stream.features, stream.logits, labels,
                      positive_class=stream.header.positive_class)


def ablation(weights, stream: StreamData, base: StrategyConfig, seeds) -> list[dict]:
    """Mean/std AUC per component variant over the given ensemble seeds."""
    rows = []
    for vid, use_lcpc, use_nfc, overrides in ABLATION_VARIANTS:
        aucs = [evaluate(replace(base, seed=s, **overrides), weights, stream).auc for s in seeds]
        rows.append({
            "id": vid,
            "lcpc": use_lcpc,
            "nfc": use_nfc,
            "auc_mean": float(np.mean(aucs)) if None not in aucs else None,
            "auc_std": float(np.std(aucs)) if None not in aucs else None,
            "aucs": aucs,
        })
    return rows


def format_ablation(rows: list[dict]) -> str:
    mark = {True: "yes", False: "no"}
    lines = [f"{'ID':>2}  {'LCPC':>4}  {'NFC':>4}  {'AUC mean':>9}  {'AUC std':>8}"]
    for r in rows:
        mean = "n/a" if r["auc_mean"] is None else f"{r['auc_mean']:.4f}"
        std = "n/a" if r["auc_std"] is None else f"{r['auc_std']:.4f}"
        lines.append(f"{r['id']:>2}  {mark[r['lcpc']]:>4}  {mark[r['nfc']]:>4}  {mean:>9}  {std:>8}")
    return "\n".join(lines)
