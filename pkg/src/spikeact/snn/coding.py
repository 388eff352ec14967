"""Latency coding of frames into single-spike events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import Frame


@dataclass(frozen=True)
class SpikeList:
    """Events ``(x, y, channel, t)`` sorted by time, at most one per site.

    ``height``, ``width`` and ``channels`` give the grid the events live on.
    """

    x: np.ndarray
    y: np.ndarray
    channel: np.ndarray
    t: np.ndarray
    height: int
    width: int
    channels: int
    t_exposition: float = 1.0

    def __len__(self):
        return int(self.t.size)

    @classmethod
    def empty(cls, height: int, width: int, channels: int, t_exposition: float = 1.0) -> "SpikeList":
        z = np.zeros(0, dtype=np.int32)
        return cls(z, z, z, np.zeros(0), height, width, channels, t_exposition)

    def time_map(self) -> np.ndarray:
        """Dense ``height x width x channels`` spike times, ``inf`` where silent."""
        tm = np.full((self.height, self.width, self.channels), np.inf)
        tm[self.y, self.x, self.channel] = self.t
        return tm

    def events(self):
        return list(zip(self.x.tolist(), self.y.tolist(), self.channel.tolist(), self.t.tolist()))


def latency_encode(f: Frame, t_exposition: float = 1.0) -> SpikeList:
    """One spike at ``t_exposition * (1 - p)`` per nonzero pixel value ``p``.

    Simultaneous events keep row-major site order.
    """
    data = np.asarray(f.data if isinstance(f, Frame) else f, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    h, w, c = data.shape
    flat = data.ravel()
    idx = np.flatnonzero(flat > 0)
    t = t_exposition * (1.0 - flat[idx])
    order = np.argsort(t, kind="stable")
    idx, t = idx[order], t[order]
    y, rem = np.divmod(idx, w * c)
    x, ch = np.divmod(rem, c)
    return SpikeList(
        x.astype(np.int32), y.astype(np.int32), ch.astype(np.int32), t, h, w, c, float(t_exposition)
    )
