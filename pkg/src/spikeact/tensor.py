"""Frame data model, the STAF tensor file format and dataset ingestion.

A STAF file is a tiny self-describing container for one float32 array::

    offset  size        field
    0       4           magic b"STAF"
    4       2           version (uint16, little-endian)
    6       1           dtype code (0 = float32)
    7       1           ndim
    8       4 * ndim    dims (uint32, little-endian)
    ...     prod(dims)  payload, row-major little-endian
"""

from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptySequenceError, FormatError, IngestionError

MAGIC = b"STAF"
VERSION = 1
DTYPE_CODES = {0: np.dtype("<f4")}

_FRAME_SUFFIXES = (".pgm",)
_TENSOR_SUFFIX = ".staf"


class Frame:
    """An immutable ``height x width x channels`` grid of values in [0, 1].

    Accepts any 2-D or 3-D array-like; 2-D inputs become single-channel.
    The data is stored as a read-only float32 array.
    """

    __slots__ = ("_data",)

    def __init__(self, data, *, clip: bool = False):
        src = np.asarray(data)
        if src.ndim not in (2, 3):
            raise ValueError(f"frame data must be 2-D or 3-D, got shape {src.shape}")
        if clip:
            src = np.clip(src, 0.0, 1.0)
        elif src.size and not (np.isfinite(src).all() and src.min() >= 0 and src.max() <= 1):
            # checked before the float32 cast so tiny negatives cannot round to zero
            raise ValueError("frame values must lie in [0, 1]")
        arr = np.array(src, dtype=np.float32, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def channels(self) -> int:
        return self._data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    def channel(self, c: int) -> np.ndarray:
        return self._data[:, :, c]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    def __repr__(self):
        return f"Frame({self.height}x{self.width}x{self.channels})"


@dataclass(frozen=True)
class LabeledSequence:
    frames: tuple[Frame, ...]
    label: str
    subject: str
    scenario: str = ""
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        shapes = {f.shape for f in self.frames}
        if len(shapes) > 1:
            raise FormatError(f"frames of one sequence differ in shape: {sorted(shapes)}")

    def __len__(self):
        return len(self.frames)

    def with_frames(self, frames: Sequence[Frame], suffix: str = "") -> "LabeledSequence":
        return LabeledSequence(tuple(frames), self.label, self.subject, self.scenario, self.source + suffix)


# --------------------------------------------------------------------------
# STAF tensor files


def write_tensor(t, path) -> None:
    """Write a Frame or array as a float32 STAF file.

    Single-channel frames are written with dims ``(h, w)``, multi-channel
    frames with ``(h, w, c)``; plain arrays keep their own shape.
    """
    if isinstance(t, Frame):
        arr = t.data[:, :, 0] if t.channels == 1 else t.data
    else:
        arr = np.asarray(t)
    if arr.ndim > 255:
        raise ValueError("too many dimensions for a STAF file")
    if any(d >= 2**32 for d in arr.shape):
        raise ValueError("STAF dims must each be < 2**32")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<HBB", VERSION, 0, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))
    os.replace(tmp, path)


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise FormatError("truncated STAF header")
    if buf[:4] != MAGIC:
        raise FormatError(f"bad STAF magic {buf[:4]!r}")
    version, code, ndim = struct.unpack_from("<HBB", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported STAF version {version}")
    if code not in DTYPE_CODES:
        raise FormatError(f"unsupported STAF dtype code {code}")
    dtype = DTYPE_CODES[code]
    offset = 8 + 4 * ndim
    if len(buf) < offset:
        raise FormatError("truncated STAF dims")
    dims = struct.unpack_from(f"<{ndim}I", buf, 8)
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - offset != expected:
        raise FormatError(f"STAF payload is {len(buf) - offset} bytes, expected {expected}")
    arr = np.frombuffer(buf, dtype=dtype, offset=offset).reshape(dims)
    return arr.astype(np.float32)


def read_tensor(path) -> np.ndarray:
    """Read a STAF file back into a float32 array."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    return decode_tensor(buf)


def read_frame(path) -> Frame:
    arr = read_tensor(path)
    if arr.ndim not in (2, 3):
        raise FormatError(f"{path} holds a {arr.ndim}-D tensor, not a frame")
    return Frame(arr)


# --------------------------------------------------------------------------
# portable graymap


_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM and return intensities divided by maxval."""
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError(f"{path}: malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary PGM (P5) is supported")
    try:
        width, height, maxval = (int(tok) for tok in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    n = width * height * dtype.itemsize
    if len(data) - pos < n:
        raise FormatError(f"{path}: truncated PGM payload")
    pix = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return pix.reshape(height, width).astype(np.float32) / np.float32(maxval)


def write_pgm(path, image, maxval: int = 255) -> None:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[2] != 1:
            raise ValueError("PGM holds a single channel")
        img = img[:, :, 0]
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = "u1" if maxval < 256 else ">u2"
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())


# --------------------------------------------------------------------------
# dataset ingestion


_SUBJECT_TAG = re.compile(r"^(?P<prefix>[A-Za-z]*)(?P<subject>\d+)(?:_(?P<scenario>.+))?$")


def parse_subject_tag(tag: str) -> tuple[str, str]:
    """Split ``person11_d1`` into ``("11", "d1")``.

    Tags that do not follow the ``<letters><digits>_<scenario>`` pattern are
    returned whole as the subject.
    """
    m = _SUBJECT_TAG.match(tag)
    if m is None:
        subject, _, scenario = tag.partition("_")
        return subject, scenario
    return m.group("subject"), m.group("scenario") or ""


def load_sequence(dir_path, label: str | None = None, subject: str | None = None) -> LabeledSequence:
    """Load one sequence directory laid out as ``<label>/<subjectTag>/``.

    The directory holds either lexicographically ordered P5 PGM frames or a
    single ``.staf`` tensor of shape ``(n, h, w)`` or ``(n, h, w, c)``.
    """
    path = Path(dir_path)
    if not path.is_dir():
        raise IngestionError(f"sequence directory not found: {path}")
    tag_subject, scenario = parse_subject_tag(path.name)
    label = label if label is not None else path.parent.name
    subject = subject if subject is not None else tag_subject

    names = sorted(p.name for p in path.iterdir() if p.is_file())
    tensors = [n for n in names if n.endswith(_TENSOR_SUFFIX)]
    images = [n for n in names if n.lower().endswith(_FRAME_SUFFIXES)]
    if tensors and images:
        raise FormatError(f"{path}: mixes PGM frames and STAF tensors")
    if len(tensors) > 1:
        raise FormatError(f"{path}: expected exactly one STAF tensor, found {len(tensors)}")

    if tensors:
        arr = read_tensor(path / tensors[0])
        if arr.ndim not in (3, 4):
            raise FormatError(f"{path / tensors[0]}: sequence tensors must be 3-D or 4-D")
        frames = [Frame(a) for a in arr]
    else:
        arrays = [read_pgm(path / n) for n in images]
        shapes = {a.shape for a in arrays}
        if len(shapes) > 1:
            raise FormatError(f"{path}: mixed frame dimensions {sorted(shapes)}")
        frames = [Frame(a) for a in arrays]
    if not frames:
        raise EmptySequenceError(f"{path}: no frames")
    return LabeledSequence(tuple(frames), label, subject, scenario, str(path))


# --------------------------------------------------------------------------
# resampling


def _interp_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres, clamped at the borders
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_array(a: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resize of the two leading axes of ``a`` (any value range)."""
    if new_h < 1 or new_w < 1:
        raise ValueError(f"target dims must be >= 1, got {new_h}x{new_w}")
    a = np.asarray(a, dtype=np.float64)
    h, w = a.shape[:2]
    if (h, w) == (new_h, new_w):
        return a.copy()
    lo, hi, fr = _interp_axis(h, new_h)
    fr = fr.reshape((-1,) + (1,) * (a.ndim - 1))
    rows = a[lo] * (1.0 - fr) + a[hi] * fr
    lo, hi, fr = _interp_axis(w, new_w)
    fr = fr.reshape((1, -1) + (1,) * (a.ndim - 2))
    return rows[:, lo] * (1.0 - fr) + rows[:, hi] * fr


def resize_bilinear(f: Frame, new_h: int, new_w: int) -> Frame:
    if new_h < 1 or new_w < 1:
        raise ValueError(f"target dims must be >= 1, got {new_h}x{new_w}")
    if (f.height, f.width) == (new_h, new_w):
        return f
    return Frame(resize_array(f.data, new_h, new_w), clip=True)


def stack_frames(frames: Sequence[Frame]) -> np.ndarray:
    return np.stack([f.data for f in frames])
