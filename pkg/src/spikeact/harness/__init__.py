"""Experiment orchestration: configs, protocols, metrics, synthetic data and
the end-to-end pipeline."""

from .config import DATA_ROOT_ENV, RunConfig, load_config, write_config
from .metrics import ConfusionMatrix, evaluate
from .pipeline import PreparedSample, Report, prepare_entries, prepare_sequence, run_pipeline
from .protocols import (
    FixedSplit,
    KthSplit,
    LeaveOneOut,
    ManifestEntry,
    format_manifest,
    protocol_folds,
    read_manifest,
    split_dataset,
)
from .synth import DEFAULT_CLASSES, BarClass, generate_synthetic, render_bar_sequence

__all__ = [
    "BarClass",
    "ConfusionMatrix",
    "DATA_ROOT_ENV",
    "DEFAULT_CLASSES",
    "FixedSplit",
    "KthSplit",
    "LeaveOneOut",
    "ManifestEntry",
    "PreparedSample",
    "Report",
    "RunConfig",
    "evaluate",
    "format_manifest",
    "generate_synthetic",
    "load_config",
    "prepare_entries",
    "prepare_sequence",
    "protocol_folds",
    "read_manifest",
    "render_bar_sequence",
    "run_pipeline",
    "split_dataset",
    "write_config",
]
