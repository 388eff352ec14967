"""Temporal fusion: early (row interleaving of frames) and late (feature
concatenation)."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Frame


class FusionKind(str, enum.Enum):
    NONE = "none"
    EARLY = "early"
    LATE = "late"


@dataclass(frozen=True)
class FusionMode:
    kind: FusionKind = FusionKind.NONE
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", FusionKind(self.kind))
        if self.n < 1:
            raise ValueError("fusion n must be >= 1")


def early_fuse(frames: Sequence[Frame]) -> Frame:
    """Interleave rows: output row ``i * n + f`` is row ``i`` of frame ``f``."""
    if not frames:
        raise ValueError("early_fuse needs at least one frame")
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise ValueError("early_fuse needs frames of identical shape")
    h, w, c = shape
    stacked = np.stack([f.data for f in frames], axis=1)  # h, n, w, c
    return Frame(stacked.reshape(h * len(frames), w, c))


def deinterleave(fused: Frame, n: int) -> list[Frame]:
    """Inverse of :func:`early_fuse`."""
    if n < 1 or fused.height % n:
        raise ValueError(f"fused height {fused.height} is not a multiple of n={n}")
    h = fused.height // n
    d = fused.data.reshape(h, n, fused.width, fused.channels)
    return [Frame(d[:, f]) for f in range(n)]


def late_fuse(features: Sequence[np.ndarray], require_equal: bool = True) -> np.ndarray:
    """Concatenate per-frame feature vectors in input order."""
    if not features:
        raise ValueError("late_fuse needs at least one feature vector")
    vecs = [np.asarray(v).ravel() for v in features]
    if require_equal and len({v.size for v in vecs}) > 1:
        raise ValueError("per-frame feature vectors differ in length")
    return np.concatenate(vecs)
