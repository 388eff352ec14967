"""Sequence preparation: background subtraction, frame selection, windowing
and the two augmentations (horizontal flip, additive Gaussian noise)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from .tensor import Frame

T = TypeVar("T")

# mean background-subtracted intensity a frame must exceed to count as moving
DEFAULT_THRESHOLDS = {
    "raw": 0.01,
    "dxdy": 0.01,
    "oa": 0.01,
    "cc": 0.01,
    "eg": 0.008,
    "mg": 0.008,
}
GRID_SAMPLE_LEN = {"eg": 36, "mg": 48}
GRID_STRIDE = 12


@dataclass(frozen=True)
class PrepConfig:
    motion_threshold: float = 0.01
    skip: int = 2
    sample_len: int = 10
    overlap_stride: int = 10

    def __post_init__(self):
        if self.sample_len < 1:
            raise ValueError("sample_len must be >= 1")
        if self.skip < 0:
            raise ValueError("skip must be >= 0")
        if self.overlap_stride < 1:
            raise ValueError("overlap_stride must be >= 1")

    @classmethod
    def for_method(cls, method: str, **overrides) -> "PrepConfig":
        """Defaults for one representation method; ``None`` overrides are ignored."""
        base = {"motion_threshold": DEFAULT_THRESHOLDS[method]}
        if method in GRID_SAMPLE_LEN:
            base.update(skip=0, sample_len=GRID_SAMPLE_LEN[method], overlap_stride=GRID_STRIDE)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)


def background_subtract(f_t: Frame, f_t1: Frame) -> Frame:
    if f_t.shape != f_t1.shape:
        raise ValueError(f"frame dims differ: {f_t.shape} vs {f_t1.shape}")
    if f_t.channels != 1:
        raise ValueError("background subtraction expects single-channel frames")
    return Frame(np.abs(f_t1.data - f_t.data), clip=True)


def background_subtract_sequence(frames: Sequence[Frame]) -> list[Frame]:
    return [background_subtract(a, b) for a, b in zip(frames[:-1], frames[1:])]


def motion_score(f: Frame) -> float:
    return float(np.mean(f.data, dtype=np.float64))


def select_indices(seq: Sequence[Frame], cfg: PrepConfig) -> list[int]:
    """Indices kept by :func:`select_frames`: motion filter first, then skipping."""
    moving = [i for i, f in enumerate(seq) if motion_score(f) > cfg.motion_threshold]
    return moving[:: cfg.skip + 1]


def select_frames(seq: Sequence[Frame], cfg: PrepConfig) -> list[Frame]:
    return [seq[i] for i in select_indices(seq, cfg)]


def assemble_samples(seq: Sequence[T], cfg: PrepConfig) -> list[list[T]]:
    n, L = len(seq), cfg.sample_len
    return [list(seq[s : s + L]) for s in range(0, n - L + 1, cfg.overlap_stride)]


def flip_horizontal(seq: Sequence[Frame]) -> list[Frame]:
    return [Frame(f.data[:, ::-1]) for f in seq]


def add_gaussian_noise(seq: Sequence[Frame], sigma: float, rng: np.random.Generator | int | None = None) -> list[Frame]:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return list(seq)
    rng = np.random.default_rng(rng)
    return [Frame(f.data + rng.normal(0.0, sigma, f.shape), clip=True) for f in seq]
