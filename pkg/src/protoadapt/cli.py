"""Command-line entry point: ``protoadapt {synth,train-base,run,ablate}``.

Exit codes: 0 success, 1 runtime or I/O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import experiments
from .data_io import (
    StreamHeader,
    SynthConfig,
    generate_synthetic,
    read_stream,
    read_weights,
    train_base_detector,
    write_stream,
    write_weights,
)
from .data_io.detector import train_accuracy
from .engine import STRATEGIES, StrategyConfig
from .errors import FormatError, InvalidArgumentError, InvalidConfigError, NumericalError

log = logging.getLogger("protoadapt")

# manifest keys that legitimately differ between otherwise identical runs
TIMING_KEYS = ("created_at", "batch_times_s", "mean_batch_time_s", "wall_time_s")


class UserError(Exception):
    """Raised for runtime/config problems that should exit with status 1."""


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {v}")
    return v


def _default_seed() -> int:
    env = os.environ.get("TTA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UserError(f"TTA_SEED must be an integer, got {env!r}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(command: str, argv: list[str], **fields) -> dict:
    return {
        "tool": "protoadapt",
        "tool_version": _tool_version(),
        "command": command,
        "argv": argv,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **fields,
    }


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UserError(f"cannot create output directory {path}: {exc}")
    return path


def cmd_synth(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = SynthConfig(d=args.d, n_source=args.n_source, n_target=args.n_target, shift=args.shift,
                      novel_weight=args.novel_weight, seed=seed)
    data = generate_synthetic(cfg)
    out = _mkdir(Path(args.out))
    src, tgt = out / "source.fts", out / "target.fts"
    # raw feature streams: no detector has scored them yet, logits are zero
    for path, x, y in ((src, data.source_x, data.source_y), (tgt, data.target_x, data.target_y)):
        header = StreamHeader(cfg.d, 2, 1, x.shape[0])
        write_stream(path, header, x, np.zeros((x.shape[0], 2)), y)
    _write_json(out / "manifest.json", _manifest(
        "synth", argv, seed=seed, synth_config=cfg.to_dict(),
        outputs={"source": str(src), "target": str(tgt)},
        sha256={"source": _sha256(src), "target": _sha256(tgt)},
    ))
    print(f"wrote {src} ({cfg.n_source} records) and {tgt} ({cfg.n_target} records)")
    return 0


def cmd_train_base(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    src = read_stream(args.source)
    if not src.has_labels:
        raise UserError(f"{args.source}: training needs a fully labelled source stream")
    det = train_base_detector(src.features, src.labels, epochs=args.epochs, lr=args.lr, seed=seed,
                              num_classes=src.header.c, positive_class=src.header.positive_class)
    acc = train_accuracy(det, src.features, src.labels)
    out = Path(args.out)
    _mkdir(out.parent)
    write_weights(out, det.weights, det.positive_class)
    outputs = {"weights": str(out)}
    if args.target:
        tgt = read_stream(args.target)
        if tgt.features.shape[1] != src.features.shape[1]:
            raise UserError("source and target streams differ in feature dimension")
        scored = det.to_stream(tgt.features, tgt.labels)
        target_out = Path(args.target_out) if args.target_out else out.with_name("target_scored.fts")
        write_stream(target_out, scored.header, scored.features, scored.logits, scored.labels)
        outputs["target_scored"] = str(target_out)
    manifest_path = out.with_name(out.stem + ".manifest.json")
    _write_json(manifest_path, _manifest(
        "train-base", argv, seed=seed, epochs=args.epochs, lr=args.lr, train_accuracy=acc,
        inputs={"source": args.source, "target": args.target}, outputs=outputs,
        sha256={k: _sha256(Path(v)) for k, v in outputs.items()},
    ))
    print(json.dumps({"train_accuracy": acc, **outputs}, sort_keys=True))
    return 0


def _strategy_config(args, strategy: str) -> StrategyConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return StrategyConfig(
        strategy=strategy, n_m=args.n_m, n_t=args.n_t, d_t=args.d_t, n_f=args.n_f, conf=args.conf,
        alpha=args.alpha, lr=args.lr, k_s=args.k_s, batch_size=args.batch, seed=seed,
        enable_lcpc_training=not args.no_lcpc_train, enable_nfc=not args.no_nfc,
        predict_after_update=args.predict_after_update,
        nfc_grad_through_neighbors=args.nfc_grad_through_neighbors,
        reset_optimizer_per_batch=args.reset_optimizer_per_batch,
    ).validate()


def _load_inputs(args):
    stream = read_stream(args.stream)
    weights, _ = read_weights(args.weights)
    if weights.shape != (stream.header.c, stream.header.d):
        raise UserError(f"weights {weights.shape} do not match stream (c={stream.header.c}, d={stream.header.d})")
    return stream, weights


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def cmd_run(args, argv) -> int:
    cfg = _strategy_config(args, args.strategy)
    stream, weights = _load_inputs(args)
    t0 = time.perf_counter()
    report = experiments.evaluate(cfg, weights, stream)
    wall = time.perf_counter() - t0
    out = _mkdir(Path(args.out))

    scores_path = out / "scores.csv"
    with open(scores_path, "w") as fh:
        fh.write("index,score\n")
        for i, s in enumerate(report.scores):
            fh.write(f"{i},{s:.17g}\n")
    summary = report.summary()
    summary_path = out / "summary.jsonl"
    with open(summary_path, "w") as fh:
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
    _write_json(out / "manifest.json", _manifest(
        "run", argv, seed=cfg.seed, config=cfg.to_dict(),
        inputs={"stream": args.stream, "weights": args.weights},
        input_sha256={"stream": _sha256(Path(args.stream)), "weights": _sha256(Path(args.weights))},
        outputs={"scores": str(scores_path), "summary": str(summary_path)},
        scores_sha256=_sha256(scores_path),
        batch_times_s=report.batch_times, mean_batch_time_s=report.mean_batch_time, wall_time_s=wall,
    ))
    if not report.has_metrics:
        print("labels unavailable: metrics not computed", file=sys.stderr)
    print(f"strategy={cfg.strategy} n={summary['n_samples']} AUC={_fmt(report.auc)} "
          f"ACC={_fmt(report.acc)} EER={_fmt(report.eer)} "
          f"batch_time={report.mean_batch_time * 1e3:.2f}ms")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_ablate(args, argv) -> int:
    base = _strategy_config(args, "ours")
    stream, weights = _load_inputs(args)
    if not stream.has_labels:
        raise UserError("ablation needs a labelled stream")
    seeds = [base.seed + r for r in range(args.repeats)]
    rows = experiments.ablation(weights, stream, base, seeds)
    table = experiments.format_ablation(rows)
    print(table)
    if args.out:
        out = _mkdir(Path(args.out))
        (out / "ablation.txt").write_text(table + "\n")
        with open(out / "ablation.jsonl", "w") as fh:
            for r in rows:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        _write_json(out / "manifest.json", _manifest(
            "ablate", argv, seeds=seeds, config=base.to_dict(),
            inputs={"stream": args.stream, "weights": args.weights},
            input_sha256={"stream": _sha256(Path(args.stream)), "weights": _sha256(Path(args.weights))},
        ))
    return 0


def _add_strategy_flags(p: argparse.ArgumentParser) -> None:
    d = StrategyConfig()
    p.add_argument("--stream", required=True, help="FTS1 stream scored by the base detector")
    p.add_argument("--weights", required=True, help="classifier weight file (FTW1)")
    p.add_argument("--n-m", type=_positive_int, default=d.n_m, help="memory bank capacity N_m")
    p.add_argument("--n-t", type=_positive_int, default=d.n_t, help="number of transform layers N_t")
    p.add_argument("--d-t", type=_positive_int, default=None, help="transformed dimension d_t (default d/2)")
    p.add_argument("--conf", type=_unit_float, default=d.conf, help="confidence threshold Conf")
    p.add_argument("--n-f", type=_nonneg_int, default=d.n_f, help="number of nearest features N_f")
    p.add_argument("--alpha", type=float, default=d.alpha, help="consistency loss weight alpha")
    p.add_argument("--lr", type=float, default=d.lr, help="Adam learning rate")
    p.add_argument("--k-s", type=_positive_int, default=d.k_s, help="update steps per batch K_s")
    p.add_argument("--batch", type=_positive_int, default=d.batch_size, help="batch size")
    p.add_argument("--seed", type=int, default=None, help="seed (default: $TTA_SEED or 0)")
    p.add_argument("--no-lcpc-train", action="store_true", help="freeze the transform layers")
    p.add_argument("--no-nfc", action="store_true", help="disable nearest-feature calibration")
    p.add_argument("--predict-after-update", action="store_true",
                   help="report predictions computed after the batch's parameter update")
    p.add_argument("--nfc-grad-through-neighbors", action="store_true",
                   help="let gradients flow through neighbour predictions")
    p.add_argument("--reset-optimizer-per-batch", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protoadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic source/target benchmark streams")
    d = SynthConfig()
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d", type=_positive_int, default=d.d)
    p.add_argument("--n-source", type=_positive_int, default=d.n_source)
    p.add_argument("--n-target", type=_positive_int, default=d.n_target)
    p.add_argument("--shift", type=float, default=1.0, help="shift magnitude along the two shift axes")
    p.add_argument("--novel-weight", type=_unit_float, default=d.novel_weight)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-base", help="train the toy linear base detector on a labelled source stream")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--epochs", type=_nonneg_int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--target", help="raw target stream to score with the trained detector")
    p.add_argument("--target-out", help="where to write the scored target stream")
    p.set_defaults(func=cmd_train_base)

    p = sub.add_parser("run", help="adapt over a stream and report scores and metrics")
    _add_strategy_flags(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="ours")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="component ablation grid over repeated seeds")
    _add_strategy_flags(p)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except (UserError, InvalidArgumentError, InvalidConfigError, FormatError, NumericalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
