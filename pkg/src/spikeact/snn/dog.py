"""On-centre / off-centre difference-of-Gaussians filtering."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..tensor import Frame
from .params import DoGParams

# responses below this are float noise from filtering flat regions
_ZERO_TOL = 1e-6


def gaussian_kernel_1d(sigma: float, size: int) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def dog_kernel(p: DoGParams = DoGParams()) -> np.ndarray:
    """Dense 2-D kernel: centre Gaussian minus surround Gaussian, each summing to 1."""
    gc = gaussian_kernel_1d(p.sigma_center, p.kernel_size)
    gs = gaussian_kernel_1d(p.sigma_surround, p.kernel_size)
    return np.outer(gc, gc) - np.outer(gs, gs)


def dog_response(f, p: DoGParams = DoGParams()) -> np.ndarray:
    """Signed DoG response of every channel (``h x w x c``), replicate borders."""
    img = np.asarray(f, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    out = np.empty_like(img)
    gc = gaussian_kernel_1d(p.sigma_center, p.kernel_size)
    gs = gaussian_kernel_1d(p.sigma_surround, p.kernel_size)
    for c in range(img.shape[2]):
        ch = img[:, :, c]
        center = ndimage.correlate1d(ndimage.correlate1d(ch, gc, axis=0, mode="nearest"), gc, axis=1, mode="nearest")
        surround = ndimage.correlate1d(ndimage.correlate1d(ch, gs, axis=0, mode="nearest"), gs, axis=1, mode="nearest")
        out[:, :, c] = center - surround
    return out


def split_on_off(r: np.ndarray) -> np.ndarray:
    """Rectify a signed response into interleaved (on, off) channels scaled to [0, 1]."""
    r = np.where(np.abs(r) < _ZERO_TOL, 0.0, r)
    peak = np.abs(r).max() if r.size else 0.0
    if peak > 0:
        r = r / peak
    h, w, c = r.shape
    out = np.empty((h, w, 2 * c))
    out[:, :, 0::2] = np.maximum(r, 0.0)
    out[:, :, 1::2] = np.maximum(-r, 0.0)
    return out


def dog_filter(f: Frame, p: DoGParams = DoGParams()) -> Frame:
    """Channels ``2c`` (on) and ``2c + 1`` (off) for every input channel ``c``."""
    return Frame(split_on_off(dog_response(f, p)), clip=True)
