"""Dense optical flow by polynomial expansion (Farnebäck's two-frame method).

Vectors are ordered ``(x, y)`` = ``(column, row)`` throughout, so a flow of
``dx = +1`` means content moved one pixel to the right.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .tensor import resize_array

_SINGULAR_RTOL = 1e-9
_BORDER_RAMP = (0.14, 0.14, 0.4472, 0.8, 1.0)


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    regularization: float = 5e-6  # ridge on the normal equations, in squared intensity units

    def __post_init__(self):
        for name in ("window_size", "poly_n"):
            v = getattr(self, name)
            if v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3, got {v}")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        if self.pyramid_levels < 1 or self.iterations < 1:
            raise ValueError("pyramid_levels and iterations must be >= 1")
        if self.poly_sigma <= 0:
            raise ValueError("poly_sigma must be positive")
        if self.regularization < 0:
            raise ValueError("regularization must be >= 0")


@dataclass(frozen=True)
class FlowField:
    dx: np.ndarray
    dy: np.ndarray
    singular: int = 0  # pixels that kept their prior on the last update

    def __post_init__(self):
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2:
            raise ValueError("dx and dy must be 2-D grids of equal shape")
        if not (np.isfinite(self.dx).all() and np.isfinite(self.dy).all()):
            raise ValueError("flow values must be finite")

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @classmethod
    def zeros(cls, h: int, w: int) -> "FlowField":
        return cls(np.zeros((h, w)), np.zeros((h, w)))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FlowField":
        """Inverse of :meth:`to_array` (channel 0 = dx, channel 1 = dy)."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError(f"flow arrays are h x w x 2, got {arr.shape}")
        return cls(arr[:, :, 0].copy(), arr[:, :, 1].copy())

    def to_array(self) -> np.ndarray:
        return np.stack([self.dx, self.dy], axis=-1)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class PolyExpansion:
    """Per-pixel quadratic model ``f(p + u) ~ u^T A u + b^T u + c``.

    ``coeffs`` packs ``(a11, a12, a22, b1, b2)`` on its last axis; ``A`` and
    ``b`` unpack it into ``(h, w, 2, 2)`` and ``(h, w, 2)`` views.
    """

    coeffs: np.ndarray
    c: np.ndarray

    @property
    def A(self) -> np.ndarray:
        k = self.coeffs
        return np.stack([np.stack([k[..., 0], k[..., 1]], -1), np.stack([k[..., 1], k[..., 2]], -1)], -2)

    @property
    def b(self) -> np.ndarray:
        return self.coeffs[..., 3:5]


def _as_gray(f) -> np.ndarray:
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ValueError("optical flow needs single-channel frames")
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D frame, got shape {arr.shape}")
    return arr


def _basis_gram_inverse(poly_n: int, poly_sigma: float):
    n = poly_n // 2
    u = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(u**2) / (2.0 * poly_sigma**2))
    # basis order: 1, x, y, x^2, y^2, xy  as (x power, y power)
    powers = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]
    uy, ux = np.meshgrid(u, u, indexing="ij")
    a = np.outer(g, g)
    B = np.stack([ux**px * uy**py for px, py in powers])
    gram = np.einsum("iyx,jyx,yx->ij", B, B, a)
    return u, g, powers, np.linalg.inv(gram)


def polynomial_expansion(f, poly_n: int = 5, poly_sigma: float = 1.1) -> PolyExpansion:
    """Weighted least-squares quadratic fit around every pixel.

    The applicability is a ``poly_n x poly_n`` Gaussian of std ``poly_sigma``;
    borders replicate the edge pixels.
    """
    img = _as_gray(f)
    if min(img.shape) < poly_n:
        raise ValueError(f"frame {img.shape} is smaller than poly_n={poly_n}")
    u, g, powers, ginv = _basis_gram_inverse(poly_n, poly_sigma)

    # correlations with applicability * basis are separable: x along axis 1, y along axis 0
    cache = {}
    for py in {p[1] for p in powers}:
        cache[py] = ndimage.correlate1d(img, g * u**py, axis=0, mode="nearest")
    proj = np.empty((6,) + img.shape)
    for i, (px, py) in enumerate(powers):
        proj[i] = ndimage.correlate1d(cache[py], g * u**px, axis=1, mode="nearest")
    r = np.einsum("ij,jyx->iyx", ginv, proj)

    coeffs = np.stack([r[3], 0.5 * r[5], r[4], r[1], r[2]], axis=-1)
    return PolyExpansion(coeffs, r[0])


def _sample_bilinear(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    # edge-clamped bilinear lookup over the two leading axes
    h, w = arr.shape[:2]
    ys = np.clip(ys, 0.0, h - 1)
    xs = np.clip(xs, 0.0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    extra = (1,) * (arr.ndim - 2)
    fy = fy.reshape(fy.shape + extra)
    fx = fx.reshape(fx.shape + extra)
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _border_weight(n: int) -> np.ndarray:
    ramp = np.array(_BORDER_RAMP)
    k = min(len(ramp), (n + 1) // 2)
    wt = np.ones(n)
    wt[:k] = ramp[:k]
    wt[n - k:] = np.minimum(wt[n - k:], ramp[:k][::-1])
    return wt


def flow_single_scale(
    exp_prev: PolyExpansion,
    exp_next: PolyExpansion,
    window_size: int,
    prior_flow: FlowField | None = None,
    reg: float = 0.0,
) -> FlowField:
    """One displacement update at a single scale, warm-started at ``prior_flow``.

    Pixels whose windowed normal matrix is singular keep their prior value.
    """
    h, w = exp_prev.c.shape
    if exp_next.c.shape != (h, w):
        raise ValueError("expansions come from differently sized frames")
    if prior_flow is None:
        prior = np.zeros((h, w, 2))
    else:
        if (prior_flow.height, prior_flow.width) != (h, w):
            raise ValueError("prior flow does not match the expansion size")
        prior = prior_flow.to_array()

    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    ys = rows + prior[..., 1]
    xs = cols + prior[..., 0]
    k2 = _sample_bilinear(exp_next.coeffs, ys, xs)
    k1 = exp_prev.coeffs

    a11 = 0.5 * (k1[..., 0] + k2[..., 0])
    a12 = 0.5 * (k1[..., 1] + k2[..., 1])
    a22 = 0.5 * (k1[..., 2] + k2[..., 2])
    px, py = prior[..., 0], prior[..., 1]
    db1 = -0.5 * (k2[..., 3] - k1[..., 3]) + a11 * px + a12 * py
    db2 = -0.5 * (k2[..., 4] - k1[..., 4]) + a12 * px + a22 * py

    # constraints whose match lies outside the frame carry no information;
    # the band next to the border is down-weighted because its expansion is clamped
    inside = (ys >= 0) & (ys <= h - 1) & (xs >= 0) & (xs <= w - 1)
    weight = np.where(inside, _border_weight(h)[:, None] * _border_weight(w)[None, :], 0.0)

    # A is symmetric, so A^T A = A A and A^T db = A db
    parts = np.stack(
        [
            a11 * a11 + a12 * a12,
            a12 * (a11 + a22),
            a12 * a12 + a22 * a22,
            a11 * db1 + a12 * db2,
            a12 * db1 + a22 * db2,
        ]
    ) * weight
    g11, g12, g22, h1, h2 = ndimage.uniform_filter(
        parts, size=(1, window_size, window_size), mode="nearest"
    )

    # a ridge term pulls untextured pixels, where the system is ill-posed, towards no motion
    g11 = g11 + reg
    g22 = g22 + reg
    det = g11 * g22 - g12 * g12
    tr = g11 + g22
    ok = det > _SINGULAR_RTOL * tr * tr
    ok &= tr > 0
    safe = np.where(ok, det, 1.0)
    dx = np.where(ok, (g22 * h1 - g12 * h2) / safe, px)
    dy = np.where(ok, (g11 * h2 - g12 * h1) / safe, py)
    return FlowField(dx, dy, singular=int((~ok).sum()))


def _pyramid_shapes(h: int, w: int, p: FlowParams) -> list[tuple[int, int]]:
    shapes = [(h, w)]
    for level in range(1, p.pyramid_levels):
        s = p.pyramid_scale**level
        lh, lw = int(round(h * s)), int(round(w * s))
        if min(lh, lw) < max(p.poly_n, 4):
            break
        shapes.append((lh, lw))
    return shapes


def _pyramid(img: np.ndarray, shapes: list[tuple[int, int]], p: FlowParams) -> list[np.ndarray]:
    out = [img]
    sigma = (1.0 / p.pyramid_scale - 1.0) * 0.5
    cur = img
    for lh, lw in shapes[1:]:
        cur = resize_array(ndimage.gaussian_filter(cur, sigma, mode="nearest"), lh, lw)
        out.append(cur)
    return out


def expansion_pyramid(f, p: FlowParams) -> list[PolyExpansion]:
    img = _as_gray(f)
    shapes = _pyramid_shapes(*img.shape, p)
    return [polynomial_expansion(level, p.poly_n, p.poly_sigma) for level in _pyramid(img, shapes, p)]


def _flow_from_pyramids(pyr_prev: list[PolyExpansion], pyr_next: list[PolyExpansion], p: FlowParams) -> FlowField:
    flow = None
    for level in range(len(pyr_prev) - 1, -1, -1):
        e1, e2 = pyr_prev[level], pyr_next[level]
        h, w = e1.c.shape
        if flow is None:
            flow = FlowField.zeros(h, w)
        else:
            sy, sx = h / flow.height, w / flow.width
            up = resize_array(flow.to_array(), h, w)
            flow = FlowField(up[..., 0] * sx, up[..., 1] * sy)
        for _ in range(p.iterations):
            flow = flow_single_scale(e1, e2, p.window_size, flow, p.regularization)
    return flow


def farneback_flow(prev, next, p: FlowParams = FlowParams()) -> FlowField:
    """Coarse-to-fine dense flow from ``prev`` to ``next``."""
    a, b = _as_gray(prev), _as_gray(next)
    if a.shape != b.shape:
        raise ValueError(f"frame dims differ: {a.shape} vs {b.shape}")
    return _flow_from_pyramids(expansion_pyramid(a, p), expansion_pyramid(b, p), p)


def flow_sequence(frames: Sequence, p: FlowParams = FlowParams()) -> list[FlowField]:
    """Flows between every pair of consecutive frames.

    Each frame's expansion pyramid is computed once and shared by the two
    pairs it belongs to.
    """
    flows = []
    prev = None
    for f in frames:
        cur = expansion_pyramid(f, p)
        if prev is not None:
            flows.append(_flow_from_pyramids(prev, cur, p))
        prev = cur
    return flows


def flow_to_frame(flow: FlowField) -> np.ndarray:
    """Flow as an ``h x w x 2`` float32 array ready for :func:`write_tensor`."""
    return flow.to_array().astype(np.float32)

