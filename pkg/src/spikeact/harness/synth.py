"""Synthetic moving-bar benchmark.

Each class is a direction and a speed, written ``bar-<dir>@<speed>``. A
sequence shows one bar perpendicular to its motion that travels ``speed``
pixels per frame and wraps around the frame edges. Bar width, contrast,
background level and start position vary per sequence, and every frame gets
mild Gaussian pixel noise. Start positions are drawn from a band at one side
of the frame, so each class follows a recognisable trajectory. Frames are
written as 8-bit PGM files under ``<root>/<label>/<subject tag>/``, together
with ``manifest.txt``, ``train.txt`` and ``test.txt``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..tensor import write_pgm
from .protocols import ManifestEntry, format_manifest
from .report import atomic_write_text

DIRECTIONS = {"left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1)}
DEFAULT_CLASSES = ("bar-left@2", "bar-right@2", "bar-up@2", "bar-down@2", "bar-right@1", "bar-right@4")


@dataclass(frozen=True)
class BarClass:
    direction: str
    speed: float

    @property
    def name(self) -> str:
        s = int(self.speed) if float(self.speed).is_integer() else self.speed
        return f"bar-{self.direction}@{s}"

    @property
    def velocity(self) -> tuple[float, float]:
        """Per-frame displacement (dx, dy) in pixels."""
        ux, uy = DIRECTIONS[self.direction]
        return ux * self.speed, uy * self.speed

    @classmethod
    def parse(cls, name: str) -> "BarClass":
        body, _, speed = name.partition("@")
        direction = body.removeprefix("bar-")
        if direction not in DIRECTIONS or not speed:
            raise ValueError(f"bad class name {name!r}; expected bar-<left|right|up|down>@<speed>")
        v = float(speed)
        if v <= 0:
            raise ValueError("speed must be positive")
        return cls(direction, v)


def _coverage(n: int, start: float, width: float) -> np.ndarray:
    """Fraction of each of ``n`` cells covered by [start, start + width) on a ring."""
    edges = np.arange(n + 1, dtype=np.float64)
    cov = np.zeros(n)
    # the interval can straddle the wrap point, so test it and its shifted copies
    for shift in (-n, 0, n):
        lo = start + shift
        hi = lo + width
        cov += np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, 1.0)
    return np.clip(cov, 0.0, 1.0)


def render_bar_sequence(
    cls: BarClass,
    dims: tuple[int, int],
    n_frames: int,
    rng: np.random.Generator,
    noise_sigma: float = 0.01,
    start_spread: float = 0.25,
) -> np.ndarray:
    """``n_frames x h x w`` float array in [0, 1] of one moving bar.

    The bar starts at a uniform position within the first ``start_spread``
    fraction of the frame.
    """
    h, w = dims
    horizontal = cls.direction in ("left", "right")
    extent = w if horizontal else h
    width = rng.uniform(4.0, 10.0)
    background = rng.uniform(0.1, 0.35)
    contrast = rng.uniform(0.4, 0.6)
    start = rng.uniform(0.0, start_spread * extent)
    step = cls.velocity[0] if horizontal else cls.velocity[1]
    frames = np.empty((n_frames, h, w))
    for t in range(n_frames):
        prof = _coverage(extent, np.mod(start + step * t, extent), width)
        img = prof[None, :] if horizontal else prof[:, None]
        frames[t] = background + contrast * np.broadcast_to(img, (h, w))
    if noise_sigma > 0:
        frames += rng.normal(0.0, noise_sigma, frames.shape)
    return np.clip(frames, 0.0, 1.0)


def _round_robin(n: int, classes: Sequence[BarClass]) -> list[BarClass]:
    return [classes[i % len(classes)] for i in range(n)]


def generate_synthetic(
    out_dir,
    classes: Sequence[str] = DEFAULT_CLASSES,
    n_train: int = 200,
    n_test: int = 100,
    dims: tuple[int, int] = (64, 64),
    n_frames: int = 49,
    noise_sigma: float = 0.01,
    seed: int = 0,
    start_spread: float = 0.25,
) -> Path:
    """Render the benchmark into ``out_dir`` and return it.

    Sequences are assigned to classes round-robin, so class counts differ by
    at most one. Every sequence has its own subject tag, and train and test
    tags never overlap. Output depends only on the arguments.
    """
    bar_classes = [BarClass.parse(c) for c in classes]
    if len({c.name for c in bar_classes}) != len(bar_classes):
        raise ValueError("duplicate classes")
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    if not 0.0 <= start_spread <= 1.0:
        raise ValueError("start_spread must lie in [0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    splits = {"train": _round_robin(n_train, bar_classes), "test": _round_robin(n_test, bar_classes)}
    entries: dict[str, list[ManifestEntry]] = {"train": [], "test": []}
    idx = 0
    for split in ("train", "test"):
        for cls in splits[split]:
            idx += 1
            tag = f"person{idx:03d}_d1"
            seq_dir = out / cls.name / tag
            seq_dir.mkdir(parents=True, exist_ok=True)
            frames = render_bar_sequence(cls, dims, n_frames, rng, noise_sigma, start_spread)
            for t, f in enumerate(frames):
                write_pgm(seq_dir / f"frame_{t:04d}.pgm", f)
            entries[split].append(ManifestEntry(str(seq_dir), cls.name, tag))
    atomic_write_text(out / "train.txt", format_manifest(entries["train"], out))
    atomic_write_text(out / "test.txt", format_manifest(entries["test"], out))
    atomic_write_text(out / "manifest.txt", format_manifest(entries["train"] + entries["test"], out))
    return out
