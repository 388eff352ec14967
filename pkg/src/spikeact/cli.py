"""Command-line entry point: ``spikeact <subcommand> ...``.

Every subcommand reads an optional ``--config`` file; explicit flags and
``--set key=value`` pairs override it. The dataset root defaults to the
``SPIKEACT_DATA`` environment variable. Failures exit with status 1 and a
message tagged with the failing stage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .classifier import load_svm, save_svm, svm_predict_many
from .errors import SpikeActError, StageError
from .harness.config import RunConfig, load_config, write_config
from .harness.metrics import evaluate
from .harness.pipeline import (
    FlowCache,
    PreparedSample,
    RunSeeds,
    load_folds,
    prepare_entries,
    run_pipeline,
    sample_features,
    train_classifier,
    train_network,
)
from .harness.protocols import ManifestEntry, format_manifest, read_manifest
from .harness.report import StageTimer, atomic_write_text
from .harness.synth import DEFAULT_CLASSES, generate_synthetic
from .snn.layer import load_layer, save_layer
from .tensor import Frame, read_tensor, write_tensor

log = logging.getLogger("spikeact")

FEATURES_FILE = "features.staf"
FEATURE_INDEX = "index.txt"


# flag name -> config key, for flags that map one-to-one onto config keys
_CONFIG_FLAGS = {
    "method": "method",
    "threshold": "motion_threshold",
    "skip": "skip",
    "sample_len": "sample_len",
    "stride": "stride",
    "augment": "augment",
    "fusion": "fusion",
    "fusion_n": "fusion_n",
    "resize": "resize",
    "grid_tile": "grid_tile",
    "seed": "seed",
    "dataset": "dataset",
    "cache_dir": "cache_dir",
}


def _add_config_flags(p: argparse.ArgumentParser, *names: str) -> None:
    p.add_argument("--config", type=Path, help="key = value run configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    for name in names:
        flag = "--" + name.replace("_", "-")
        if name == "method":
            p.add_argument(flag, choices=["raw", "dxdy", "oa", "cc", "eg", "mg"])
        elif name == "fusion":
            p.add_argument(flag, choices=["none", "early", "late"])
        else:
            p.add_argument(flag)


def _config(args) -> RunConfig:
    overrides = {}
    for name, key in _CONFIG_FLAGS.items():
        v = getattr(args, name, None)
        if v is not None:
            overrides[key] = str(v)
    for pair in args.set:
        k, sep, v = pair.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[k.strip()] = v.strip()
    return load_config(args.config, overrides).resolved()


# --------------------------------------------------------------------------
# sample and feature files


def write_samples(samples: list[PreparedSample], out_dir: Path, name: str) -> Path:
    """One ``(n, h, w, c)`` tensor per sample plus ``<name>.txt`` manifest."""
    folder = out_dir / name
    folder.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        path = folder / f"sample_{i:06d}.staf"
        write_tensor(np.stack([f.data for f in s.frames]), path)
        entries.append(ManifestEntry(str(path), s.label, s.subject))
    manifest = out_dir / f"{name}.txt"
    atomic_write_text(manifest, format_manifest(entries, out_dir))
    return manifest


def read_samples(manifest: Path) -> list[PreparedSample]:
    out = []
    for e in read_manifest(manifest):
        arr = read_tensor(e.path)
        if arr.ndim == 3:
            arr = arr[None]
        out.append(PreparedSample(tuple(Frame(a) for a in arr), e.label, e.subject, e.path))
    return out


def write_features(X: np.ndarray, samples: list[PreparedSample], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(X, out_dir / FEATURES_FILE)
    rows = [f"{s.label}\t{s.subject}" for s in samples]
    atomic_write_text(out_dir / FEATURE_INDEX, "\n".join(rows) + "\n")


def read_features(folder: Path) -> tuple[np.ndarray, list[str]]:
    X = read_tensor(folder / FEATURES_FILE).astype(np.float64)
    labels = [ln.split("\t")[0] for ln in (folder / FEATURE_INDEX).read_text().splitlines() if ln.strip()]
    if len(labels) != len(X):
        raise ValueError(f"{folder}: {len(X)} feature rows but {len(labels)} labels")
    return X, labels


# --------------------------------------------------------------------------
# subcommands


def cmd_preprocess(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    timer = StageTimer()
    with timer.stage("load"):
        folds = load_folds(cfg)
        if len(folds) != 1:
            raise ValueError("preprocess handles single-split protocols only")
        train, test = folds[0]
    seeds = RunSeeds.from_seed(cfg.seed)
    cache = FlowCache(cfg.cache_dir)
    with timer.stage("prep"):
        train_s = prepare_entries(train, cfg, cache, np.random.default_rng(seeds.augment))
        test_s = prepare_entries(test, cfg, cache)
        write_samples(train_s, out, "train")
        write_samples(test_s, out, "test")
    write_config(cfg, out / "config.txt")
    atomic_write_text(out / "timing.log", timer.to_text())
    print(f"{len(train_s)} train / {len(test_s)} test samples written to {out}")
    return 0


def cmd_train_snn(args) -> int:
    cfg = _config(args)
    timer = StageTimer()
    with timer.stage("load"):
        samples = read_samples(Path(args.input))
    with timer.stage("snn-train"):
        L = train_network(samples, cfg, RunSeeds.from_seed(cfg.seed))
    with timer.stage("write"):
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_layer(L, args.out, {"seed": cfg.seed, "epochs": cfg.n_epoch, "n_kernels": cfg.n_kernels,
                                 "use_dog": cfg.use_dog, "pool_window": cfg.pool_window})
    print(f"trained {L.n_kernels} kernels on {len(samples)} samples: {args.out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _config(args)
    with StageTimer().stage("extract"):
        L = load_layer(args.model)
        samples = read_samples(Path(args.input))
        X = sample_features(samples, L, cfg)
        write_features(X, samples, Path(args.out))
    print(f"{X.shape[0]} feature vectors of size {X.shape[1]}: {args.out}")
    return 0


def cmd_train_svm(args) -> int:
    cfg = _config(args)
    with StageTimer().stage("svm-train"):
        X, y = read_features(Path(args.features))
        m = train_classifier(X, y, cfg, RunSeeds.from_seed(cfg.seed))
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_svm(m, args.out)
    print(f"SVM over {len(m.classes)} classes: {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    with StageTimer().stage("evaluate"):
        m = load_svm(args.svm)
        X, y = read_features(Path(args.features))
        acc, cm = evaluate(svm_predict_many(m, X), y, sorted(set(m.classes) | set(y)))
        if args.out:
            out = Path(args.out)
            atomic_write_text(out / "accuracy.txt", f"accuracy = {acc:.4f}\n")
            atomic_write_text(out / "confusion.csv", cm.to_csv())
    print(f"accuracy {acc:.2f}%")
    print(cm.to_csv(), end="")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg = cfg.replace(out=args.out)
    r = run_pipeline(cfg)
    print(f"accuracy {r.accuracy:.2f}%  ({r.out_dir})")
    print(r.timing.to_text(), end="")
    return 0


def cmd_synth(args) -> int:
    with StageTimer().stage("synth"):
        classes = args.classes.split(",") if args.classes else DEFAULT_CLASSES
        h, w = (int(v) for v in args.dims.lower().split("x"))
        out = generate_synthetic(args.out, classes, args.n_train, args.n_test, (h, w), args.frames,
                                 args.noise, args.seed, args.start_spread)
    print(f"synthetic dataset written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikeact", description="Motion representations + STDP spiking features + SVM.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="prepare samples from a dataset")
    _add_config_flags(p, "method", "threshold", "skip", "sample_len", "stride", "augment", "fusion",
                      "fusion_n", "resize", "grid_tile", "seed", "dataset", "cache_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-snn", help="train the spiking layer on prepared samples")
    _add_config_flags(p, "seed")
    p.add_argument("--in", dest="input", required=True, help="sample manifest written by preprocess")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_snn)

    p = sub.add_parser("extract", help="compute pooled spike features")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-svm", help="train the linear read-out")
    _add_config_flags(p, "seed")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("evaluate", help="score a trained SVM on a feature folder")
    p.add_argument("--svm", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_config_flags(p, "method", "threshold", "skip", "sample_len", "stride", "augment", "fusion",
                      "fusion_n", "resize", "grid_tile", "seed", "dataset", "cache_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", help="render the moving-bar benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", help="comma separated, e.g. bar-left@2,bar-right@1")
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--dims", default="64x64")
    p.add_argument("--frames", type=int, default=49)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--start-spread", type=float, default=0.25, help="fraction of the frame bars may start in")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (SpikeActError, ValueError, OSError) as e:
        print(f"error: [{args.command}] {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
