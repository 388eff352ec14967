"""Static frames that carry motion: the five flow-derived representations.

All outputs are :class:`~spikeact.tensor.Frame` objects with values in [0, 1]
so they can be latency coded directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .flow import FlowField
from .tensor import Frame, resize_array

EG_GRID = (6, 6)
MG_FLOWS_PER_ROW = 12
MG_FLOW_ROWS = 4
MG_CHANNELS = ("left", "right", "up", "down")


class ReprMethod(str, enum.Enum):
    RAW = "raw"
    DXDY = "dxdy"
    OA = "oa"
    CC = "cc"
    EG = "eg"
    MG = "mg"

    @property
    def is_grid(self) -> bool:
        return self in (ReprMethod.EG, ReprMethod.MG)

    @property
    def uses_flow(self) -> bool:
        return self is not ReprMethod.RAW


@dataclass(frozen=True)
class NormalizationSpec:
    flow_clip: float = 8.0

    def __post_init__(self):
        if not self.flow_clip > 0:
            raise ValueError("flow_clip must be positive")


@dataclass(frozen=True)
class ReprParams:
    flow_clip: float = 8.0
    theta: float = 30.0
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.3
    grid_tile: tuple[int, int] | None = None  # per-tile resize for EG/MG, None keeps flow dims

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if not self.canny_low < self.canny_high:
            raise ValueError("canny_low must be below canny_high")
        NormalizationSpec(self.flow_clip)

    @property
    def norm(self) -> NormalizationSpec:
        return NormalizationSpec(self.flow_clip)


def _signed_unit(v: np.ndarray, clip: float) -> np.ndarray:
    return np.clip(v, -clip, clip) / (2.0 * clip) + 0.5


def repr_dxdy(flow: FlowField, n: NormalizationSpec = NormalizationSpec()) -> Frame:
    """Two channels, zero displacement at 0.5 and +-flow_clip at the ends."""
    c = n.flow_clip
    return Frame(np.stack([_signed_unit(flow.dx, c), _signed_unit(flow.dy, c)], axis=-1), clip=True)


def hsv_to_rgb(h, s, v):
    """Hexcone HSV to RGB; ``h`` in degrees, ``s`` and ``v`` in [0, 1].

    Works elementwise on scalars or arrays and returns an ``(r, g, b)`` tuple.
    """
    h = np.mod(np.asarray(h, dtype=np.float64), 360.0)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    m = v - c
    sector = np.minimum(np.floor(hp).astype(int), 5)
    zero = np.zeros_like(c)
    rgb_options = [
        (c, x, zero),
        (x, c, zero),
        (zero, c, x),
        (zero, x, c),
        (x, zero, c),
        (c, zero, x),
    ]
    out = []
    for ch in range(3):
        choices = [np.broadcast_to(opt[ch], sector.shape) for opt in rgb_options]
        out.append(np.choose(sector, choices) + m)
    if out[0].ndim == 0:
        return tuple(float(o) for o in out)
    return tuple(out)


def repr_oa(flow: FlowField, n: NormalizationSpec = NormalizationSpec()) -> Frame:
    """Orientation as hue, amplitude as value (saturation fixed at 1), in RGB."""
    hue = np.mod(np.degrees(np.arctan2(flow.dy, flow.dx)), 360.0)
    val = np.clip(flow.magnitude(), 0.0, n.flow_clip) / n.flow_clip
    r, g, b = hsv_to_rgb(hue, np.ones_like(val), val)
    return Frame(np.stack([r, g, b], axis=-1), clip=True)


def repr_cc(flow: FlowField, gray: Frame, theta: float = 30.0, n: NormalizationSpec = NormalizationSpec()) -> Frame:
    """DXDY channels plus the grayscale frame masked to strongly moving pixels.

    ``theta`` is in raw displacement units (pixels/frame), applied before
    normalization.
    """
    if gray.channels != 1:
        raise ValueError("gray must be a single-channel frame")
    if (gray.height, gray.width) != (flow.height, flow.width):
        raise ValueError("gray frame and flow differ in size")
    moving = (np.abs(flow.dx) + np.abs(flow.dy)) > theta
    third = np.where(moving, gray.data[:, :, 0], 0.0)
    d = repr_dxdy(flow, n).data
    return Frame(np.concatenate([d, third[:, :, None]], axis=-1))


def flow_magnitude_frame(flow: FlowField, n: NormalizationSpec = NormalizationSpec()) -> Frame:
    return Frame(np.clip(flow.magnitude(), 0.0, n.flow_clip) / n.flow_clip, clip=True)


def canny_edges(mag, low: float = 0.1, high: float = 0.3, sigma: float = 1.4) -> Frame:
    """Binary Canny edge map of a single-channel frame.

    Gradients are the (unnormalized) 3x3 Sobel responses of the Gaussian
    smoothed input; ``low`` and ``high`` threshold their magnitude.
    """
    if not low < high:
        raise ValueError("low threshold must be below high threshold")
    img = np.asarray(mag, dtype=np.float64)
    if img.ndim == 3:
        img = img[:, :, 0]
    if sigma > 0:
        img = ndimage.gaussian_filter(img, sigma, mode="nearest")
    gy = ndimage.sobel(img, axis=0, mode="nearest")
    gx = ndimage.sobel(img, axis=1, mode="nearest")
    grad = np.hypot(gx, gy)

    # non-maximum suppression along the quantized gradient direction
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]  # (dy, dx) for 0, 45, 90, 135 degrees
    padded = np.pad(grad, 1, mode="constant")
    h, w = grad.shape
    keep = np.zeros_like(grad, dtype=bool)
    for s, (oy, ox) in enumerate(offsets):
        fwd = padded[1 + oy : 1 + oy + h, 1 + ox : 1 + ox + w]
        back = padded[1 - oy : 1 - oy + h, 1 - ox : 1 - ox + w]
        # ties keep the pixel on the positive side only, so a symmetric ridge stays 1 px wide
        keep |= (sector == s) & (grad > fwd) & (grad >= back)
    nms = np.where(keep, grad, 0.0)

    strong = nms >= high
    candidate = nms >= low
    labels, count = ndimage.label(candidate, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return Frame(np.zeros_like(grad))
    has_strong = np.zeros(count + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return Frame(has_strong[labels].astype(np.float64))


def eg_tile_origin(index: int) -> tuple[int, int]:
    """Tile (row, col) of flow ``index`` in the 6 x 6 edge grid (row-major)."""
    return divmod(index, EG_GRID[1])


def mg_tile_origin(index: int, channel: int) -> tuple[int, int]:
    """Tile (row, col) of ``channel`` of flow ``index`` in the motion grid.

    The four channel tiles of a flow stack vertically; flows advance left to
    right, twelve per block row, four block rows.
    """
    block_row, col = divmod(index, MG_FLOWS_PER_ROW)
    return block_row * len(MG_CHANNELS) + channel, col


def _tile(tiles: dict[tuple[int, int], np.ndarray], grid: tuple[int, int], th: int, tw: int) -> np.ndarray:
    out = np.zeros((grid[0] * th, grid[1] * tw))
    for (r, c), t in tiles.items():
        out[r * th : (r + 1) * th, c * tw : (c + 1) * tw] = t
    return out


def _fit_tile(a: np.ndarray, tile: tuple[int, int] | None) -> np.ndarray:
    if tile is None:
        return a
    return np.clip(resize_array(a, *tile), 0.0, 1.0)


def repr_eg(flows: Sequence[FlowField], params: ReprParams = ReprParams()) -> Frame:
    """Motion edges of 36 consecutive flows laid out on a 6 x 6 grid."""
    n_tiles = EG_GRID[0] * EG_GRID[1]
    if len(flows) != n_tiles:
        raise ValueError(f"EG needs exactly {n_tiles} flows, got {len(flows)}")
    tiles = {}
    for i, fl in enumerate(flows):
        mag = _fit_tile(flow_magnitude_frame(fl, params.norm).data[:, :, 0], params.grid_tile)
        edges = canny_edges(mag, params.canny_low, params.canny_high, params.canny_sigma)
        tiles[eg_tile_origin(i)] = edges.data[:, :, 0]
    th, tw = next(iter(tiles.values())).shape
    return Frame(_tile(tiles, EG_GRID, th, tw))


def flow_to_4ch(flow: FlowField, n: NormalizationSpec = NormalizationSpec()) -> tuple[Frame, Frame, Frame, Frame]:
    """Split a flow into (left, right, up, down) magnitude frames."""
    c = n.flow_clip
    parts = (
        np.maximum(-flow.dx, 0.0),
        np.maximum(flow.dx, 0.0),
        np.maximum(-flow.dy, 0.0),
        np.maximum(flow.dy, 0.0),
    )
    return tuple(Frame(np.clip(p / c, 0.0, 1.0)) for p in parts)


def repr_mg(flows: Sequence[FlowField], params: ReprParams = ReprParams()) -> Frame:
    """48 flows split into four signed-direction tiles each: a 16 x 12 tile grid."""
    n_flows = MG_FLOWS_PER_ROW * MG_FLOW_ROWS
    if len(flows) != n_flows:
        raise ValueError(f"MG needs exactly {n_flows} flows, got {len(flows)}")
    tiles = {}
    for i, fl in enumerate(flows):
        for ch, part in enumerate(flow_to_4ch(fl, params.norm)):
            tiles[mg_tile_origin(i, ch)] = _fit_tile(part.data[:, :, 0], params.grid_tile)
    th, tw = next(iter(tiles.values())).shape
    grid = (MG_FLOW_ROWS * len(MG_CHANNELS), MG_FLOWS_PER_ROW)
    return Frame(_tile(tiles, grid, th, tw))


def represent_flow(method: ReprMethod | str, flow: FlowField, gray: Frame | None, params: ReprParams) -> Frame:
    """Per-flow representations (DXDY, OA, CC)."""
    method = ReprMethod(method)
    if method is ReprMethod.DXDY:
        return repr_dxdy(flow, params.norm)
    if method is ReprMethod.OA:
        return repr_oa(flow, params.norm)
    if method is ReprMethod.CC:
        if gray is None:
            raise ValueError("CC needs the grayscale frame")
        return repr_cc(flow, gray, params.theta, params.norm)
    raise ValueError(f"{method.value} is not a per-flow representation")


def represent_grid(method: ReprMethod | str, flows: Sequence[FlowField], params: ReprParams) -> Frame:
    method = ReprMethod(method)
    if method is ReprMethod.EG:
        return repr_eg(flows, params)
    if method is ReprMethod.MG:
        return repr_mg(flows, params)
    raise ValueError(f"{method.value} is not a grid representation")
