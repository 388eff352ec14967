"""End-to-end run: prep, flow, representation, fusion, DoG, SNN, SVM, metrics.

The stages are also exposed one by one so the CLI can run them separately
with files in between.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..classifier import SvmModel, svm_predict_many, svm_train
from ..errors import IngestionError
from ..flow import FlowField, FlowParams, flow_sequence
from ..fusion import FusionKind, early_fuse, late_fuse
from ..prep import (
    add_gaussian_noise,
    assemble_samples,
    background_subtract,
    background_subtract_sequence,
    flip_horizontal,
    motion_score,
    select_indices,
)
from ..representations import ReprMethod, represent_flow, represent_grid
from ..snn.dog import dog_filter
from ..snn.layer import LayerState, extract_features, train_layer
from ..tensor import Frame, LabeledSequence, load_sequence, read_tensor, resize_bilinear, write_tensor
from .config import RunConfig, write_config
from .metrics import ConfusionMatrix, evaluate
from .protocols import FixedSplit, KthSplit, LeaveOneOut, Manifest, ManifestEntry, protocol_folds, read_manifest
from .report import StageTimer, atomic_write_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreparedSample:
    """Network input(s) of one classification sample.

    One frame for single-frame and early-fused samples, ``n`` frames for
    late fusion (their features are concatenated).
    """

    frames: tuple[Frame, ...]
    label: str
    subject: str
    source: str = ""


@dataclass
class RunSeeds:
    augment: int
    subset: int
    snn_subset: int
    snn: int
    svm: int

    @classmethod
    def from_seed(cls, seed: int) -> "RunSeeds":
        children = np.random.SeedSequence(seed).spawn(5)
        return cls(*(int(c.generate_state(1)[0]) for c in children))


@dataclass
class FoldResult:
    accuracy: float
    confusion: ConfusionMatrix
    n_train: int
    n_test: int
    predictions: list[tuple[str, str, str]] = field(repr=False, default_factory=list)  # source, truth, pred


@dataclass
class Report:
    accuracy: float
    confusion: ConfusionMatrix
    folds: list[FoldResult]
    timing: StageTimer
    out_dir: Path | None
    config: RunConfig


# --------------------------------------------------------------------------
# dataset


def load_folds(cfg: RunConfig) -> list[tuple[Manifest, Manifest]]:
    root = cfg.dataset_root()

    def resolve(name: str | None) -> Path:
        if name is None:
            raise ValueError("manifest path is not set")
        p = Path(name)
        if not p.is_absolute() and root is not None:
            p = root / p
        return p

    if cfg.protocol == "fixed":
        train_m, test_m = resolve(cfg.train_manifest), resolve(cfg.test_manifest)
        train = read_manifest(train_m, root or train_m.parent)
        test = read_manifest(test_m, root or test_m.parent)
        folds = protocol_folds([], FixedSplit(tuple(train), tuple(test)))
    else:
        mpath = resolve(cfg.manifest)
        entries = read_manifest(mpath, root or mpath.parent)
        proto = KthSplit() if cfg.protocol == "kth" else LeaveOneOut()
        folds = protocol_folds(entries, proto)
    if cfg.train_fraction < 1.0:
        rng = np.random.default_rng(RunSeeds.from_seed(cfg.seed).subset)
        folds = [(subsample_per_class(tr, cfg.train_fraction, rng), te) for tr, te in folds]
    return folds


def subsample_per_class(entries: Sequence[ManifestEntry], fraction: float, rng: np.random.Generator) -> Manifest:
    """Keep ``round(fraction * n)`` (at least one) sequences of each class, in order."""
    keep = set()
    for label in sorted({e.label for e in entries}):
        idx = [i for i, e in enumerate(entries) if e.label == label]
        n = max(1, int(round(fraction * len(idx))))
        keep.update(idx[j] for j in sorted(rng.permutation(len(idx))[:n]))
    return [e for i, e in enumerate(entries) if i in keep]


def load_entry(e: ManifestEntry, cfg: RunConfig) -> LabeledSequence:
    seq = load_sequence(e.path, label=e.label, subject=e.subject)
    if cfg.resize is not None:
        seq = seq.with_frames([resize_bilinear(f, *cfg.resize) for f in seq.frames])
    return seq


def augmented(seq: LabeledSequence, cfg: RunConfig, rng: np.random.Generator) -> list[LabeledSequence]:
    """The sequence itself followed by its flipped and/or noisy copies."""
    out = [seq]
    if "flip" in cfg.augment:
        out.append(seq.with_frames(flip_horizontal(seq.frames), "#flip"))
    if "noise" in cfg.augment:
        out += [s.with_frames(add_gaussian_noise(s.frames, cfg.noise_sigma, rng), "#noise") for s in list(out)]
    return out


# --------------------------------------------------------------------------
# flow with an optional on-disk cache


class FlowCache:
    def __init__(self, directory=None):
        self.dir = Path(directory) if directory else None
        self.seconds = 0.0

    @staticmethod
    def _key(frames: Sequence[Frame], p: FlowParams) -> str:
        h = hashlib.sha256(repr(p).encode())
        for f in frames:
            h.update(f.data.tobytes())
        return h.hexdigest()

    def flows(self, frames: Sequence[Frame], p: FlowParams) -> list[FlowField]:
        if len(frames) < 2:
            return []
        path = None
        if self.dir is not None:
            path = self.dir / f"{self._key(frames, p)}.staf"
            if path.exists():
                arr = read_tensor(path).astype(np.float64)
                return [FlowField.from_array(a) for a in arr]
        start = time.perf_counter()
        flows = flow_sequence(frames, p)
        self.seconds += time.perf_counter() - start
        if path is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            write_tensor(np.stack([fl.to_array() for fl in flows]), path)
        return flows


# --------------------------------------------------------------------------
# per-sequence preparation


def prepare_sequence(seq: LabeledSequence, cfg: RunConfig, cache: FlowCache | None = None) -> list[list[Frame]]:
    """Representation frames of every sample window in ``seq``."""
    cache = cache or FlowCache()
    method = ReprMethod(cfg.method)
    prep = cfg.prep_config()
    frames = list(seq.frames)
    if any(f.channels != 1 for f in frames):
        raise ValueError(f"{seq.source}: expected single-channel frames")

    if method.is_grid:
        # raw consecutive frames; pairs with too little motion are dropped
        flows = cache.flows(frames, cfg.flow_params())
        moving = [fl for fl, a, b in zip(flows, frames[:-1], frames[1:])
                  if motion_score(background_subtract(a, b)) > prep.motion_threshold]
        windows = assemble_samples(moving, prep)
        return [[represent_grid(method, w, cfg.repr_params())] for w in windows]

    diffs = background_subtract_sequence(frames)
    keep = select_indices(diffs, prep)
    selected = [diffs[i] for i in keep]
    if method is ReprMethod.RAW:
        return assemble_samples(selected, prep)

    flows = cache.flows(selected, cfg.flow_params())
    # difference i is taken between frames i and i + 1; CC shows the later one
    grays = [frames[keep[i] + 1] for i in range(len(flows))]
    reps = [represent_flow(method, fl, g, cfg.repr_params()) for fl, g in zip(flows, grays)]
    return assemble_samples(reps, prep)


def fuse(windows: Iterable[list[Frame]], cfg: RunConfig, label: str, subject: str, source: str) -> list[PreparedSample]:
    kind = cfg.fusion_mode().kind
    out = []
    for w in windows:
        if kind is FusionKind.NONE:
            out += [PreparedSample((f,), label, subject, source) for f in w]
        elif kind is FusionKind.EARLY:
            out.append(PreparedSample((early_fuse(w),), label, subject, source))
        else:
            out.append(PreparedSample(tuple(w), label, subject, source))
    return out


def prepare_entries(
    entries: Sequence[ManifestEntry],
    cfg: RunConfig,
    cache: FlowCache | None = None,
    augment_rng: np.random.Generator | None = None,
) -> list[PreparedSample]:
    """Load, (optionally) augment and prepare a list of sequences."""
    out = []
    for e in entries:
        seq = load_entry(e, cfg)
        variants = augmented(seq, cfg, augment_rng) if augment_rng is not None else [seq]
        for v in variants:
            out += fuse(prepare_sequence(v, cfg, cache), cfg, e.label, e.subject, v.source)
    return out


# --------------------------------------------------------------------------
# network and classifier stages


def network_input(f: Frame, cfg: RunConfig) -> Frame:
    return dog_filter(f, cfg.dog_params()) if cfg.use_dog else f


def train_network(samples: Sequence[PreparedSample], cfg: RunConfig, seeds: RunSeeds) -> LayerState:
    frames = [network_input(f, cfg) for s in samples for f in s.frames]
    if not frames:
        raise ValueError("no training frames survived preparation")
    if cfg.snn_train_samples is not None and cfg.snn_train_samples < len(frames):
        rng = np.random.default_rng(seeds.snn_subset)
        idx = np.sort(rng.choice(len(frames), cfg.snn_train_samples, replace=False))
        frames = [frames[i] for i in idx]
    return train_layer(frames, cfg.layer_config(), cfg.stdp_params(), cfg.threshold_params(), seed=seeds.snn)


def sample_features(samples: Sequence[PreparedSample], L: LayerState, cfg: RunConfig) -> np.ndarray:
    rows = []
    for s in samples:
        parts = [extract_features(network_input(f, cfg), L, cfg.pool_window, cfg.t_exposition) for f in s.frames]
        rows.append(late_fuse(parts))
    return np.stack(rows)


def train_classifier(X: np.ndarray, y: Sequence[str], cfg: RunConfig, seeds: RunSeeds) -> SvmModel:
    return svm_train(X, y, C=cfg.svm_c, epochs=cfg.svm_epochs, seed=seeds.svm)


def evaluate_model(m: SvmModel, X: np.ndarray, y: Sequence[str]) -> tuple[float, ConfusionMatrix, list[str]]:
    pred = svm_predict_many(m, X)
    classes = sorted(set(m.classes) | set(y))
    acc, cm = evaluate(pred, y, classes)
    return acc, cm, pred


# --------------------------------------------------------------------------
# full run


def run_fold(train: Manifest, test: Manifest, cfg: RunConfig, timer: StageTimer, cache: FlowCache) -> FoldResult:
    seeds = RunSeeds.from_seed(cfg.seed)
    flow_before = cache.seconds
    with timer.stage("prep"):
        if not train or not test:
            raise IngestionError("empty train or test split")
        train_s = prepare_entries(train, cfg, cache, np.random.default_rng(seeds.augment))
        test_s = prepare_entries(test, cfg, cache)
        if not train_s or not test_s:
            raise ValueError("no samples survived preparation")
    timer.add("flow", cache.seconds - flow_before)
    with timer.stage("snn-train"):
        L = train_network(train_s, cfg, seeds)
    with timer.stage("extract"):
        X_train = sample_features(train_s, L, cfg)
        X_test = sample_features(test_s, L, cfg)
    with timer.stage("svm-train"):
        m = train_classifier(X_train, [s.label for s in train_s], cfg, seeds)
    with timer.stage("evaluate"):
        truth = [s.label for s in test_s]
        acc, cm, pred = evaluate_model(m, X_test, truth)
    preds = [(s.source, t, p) for s, t, p in zip(test_s, truth, pred)]
    log.info("fold: %d train / %d test samples, accuracy %.2f%%", len(train_s), len(test_s), acc)
    return FoldResult(acc, cm, len(train_s), len(test_s), preds)


def run_pipeline(cfg: RunConfig, write: bool = True) -> Report:
    """Run every fold of ``cfg`` and (optionally) write the report files.

    Output files in ``cfg.out``: ``accuracy.txt``, ``confusion.csv``,
    ``config.txt`` (resolved), ``predictions.tsv`` and ``timing.log``.
    Any stage failure raises :class:`~spikeact.errors.StageError`.
    """
    cfg = cfg.resolved()
    timer = StageTimer()
    cache = FlowCache(cfg.cache_dir)
    with timer.stage("load"):
        folds = load_folds(cfg)
    results = [run_fold(tr, te, cfg, timer, cache) for tr, te in folds]
    cm = results[0].confusion
    for r in results[1:]:
        cm = cm + r.confusion
    report = Report(cm.accuracy(), cm, results, timer, Path(cfg.out) if write else None, cfg)
    if write:
        with timer.stage("write"):
            write_report(report)
    return report


def write_report(r: Report) -> None:
    out = r.out_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"accuracy = {r.accuracy:.4f}"]
    if len(r.folds) > 1:
        lines += [f"fold_{i} = {f.accuracy:.4f}" for i, f in enumerate(r.folds)]
    lines += [f"n_train = {sum(f.n_train for f in r.folds)}", f"n_test = {sum(f.n_test for f in r.folds)}"]
    atomic_write_text(out / "accuracy.txt", "\n".join(lines) + "\n")
    atomic_write_text(out / "confusion.csv", r.confusion.to_csv())
    write_config(r.config, out / "config.txt")
    rows = ["source\ttruth\tprediction"] + ["\t".join(p) for f in r.folds for p in f.predictions]
    atomic_write_text(out / "predictions.tsv", "\n".join(rows) + "\n")
    # timing last so it includes everything before it
    atomic_write_text(out / "timing.log", r.timing.to_text())
