"""Event-driven integrate-and-fire convolution with winner-take-all, STDP and
threshold adaptation.

Neurons have no leak. Input spikes are integrated in time order; spikes that
share a timestamp are integrated together before any threshold is checked.
When several kernels at one position cross their threshold in the same
instant, the one exceeding it by the most wins (lowest kernel index on ties).
The winner inhibits every other kernel at that position for the rest of the
sample, so each position fires at most once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numba
import numpy as np

from ..tensor import Frame, read_tensor, write_tensor
from .coding import SpikeList, latency_encode
from .params import LayerConfig, StdpParams, ThresholdParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerState:
    weights: np.ndarray  # n_kernels x kh x kw x c_in
    thresholds: np.ndarray  # n_kernels
    stride: int = 1
    padding: int = 2

    @property
    def n_kernels(self) -> int:
        return self.weights.shape[0]

    @property
    def kernel_shape(self) -> tuple[int, int]:
        return self.weights.shape[1:3]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[3]

    def output_shape(self, height: int, width: int) -> tuple[int, int]:
        kh, kw = self.kernel_shape
        oh = (height + 2 * self.padding - kh) // self.stride + 1
        ow = (width + 2 * self.padding - kw) // self.stride + 1
        return oh, ow

    def copy(self) -> "LayerState":
        return replace(self, weights=self.weights.copy(), thresholds=self.thresholds.copy())


@dataclass(frozen=True)
class Winner:
    y: int
    x: int
    kernel: int
    t: float


@numba.njit(cache=True)
def _simulate(ys, xs, cs, ts, weights, thresholds, height, width, stride, pad, first_only):
    n_k, kh, kw, _ = weights.shape
    oh = (height + 2 * pad - kh) // stride + 1
    ow = (width + 2 * pad - kw) // stride + 1
    pot = np.zeros((oh, ow, n_k))
    fired = np.zeros((oh, ow), dtype=np.bool_)
    mark = np.full((oh, ow), -1, dtype=np.int64)
    touched = np.empty(oh * ow, dtype=np.int64)
    cap = oh * ow
    out_y = np.empty(cap, dtype=np.int32)
    out_x = np.empty(cap, dtype=np.int32)
    out_k = np.empty(cap, dtype=np.int32)
    out_t = np.empty(cap, dtype=np.float64)
    out_margin = np.empty(cap, dtype=np.float64)
    n_out = 0
    n = ts.shape[0]
    i = 0
    group = 0
    while i < n:
        t = ts[i]
        n_touched = 0
        while i < n and ts[i] == t:
            y = ys[i]
            x = xs[i]
            c = cs[i]
            for ky in range(kh):
                num_y = y + pad - ky
                if num_y < 0 or num_y % stride != 0:
                    continue
                oy = num_y // stride
                if oy >= oh:
                    continue
                for kx in range(kw):
                    num_x = x + pad - kx
                    if num_x < 0 or num_x % stride != 0:
                        continue
                    ox = num_x // stride
                    if ox >= ow or fired[oy, ox]:
                        continue
                    for k in range(n_k):
                        pot[oy, ox, k] += weights[k, ky, kx, c]
                    if mark[oy, ox] != group:
                        mark[oy, ox] = group
                        touched[n_touched] = oy * ow + ox
                        n_touched += 1
            i += 1
        if n_touched > 1:
            touched[:n_touched].sort()
        for j in range(n_touched):
            pos = touched[j]
            oy = pos // ow
            ox = pos % ow
            best = -1
            best_margin = 0.0
            for k in range(n_k):
                m = pot[oy, ox, k] - thresholds[k]
                if m >= 0.0 and (best < 0 or m > best_margin):
                    best = k
                    best_margin = m
            if best >= 0:
                fired[oy, ox] = True
                out_y[n_out] = oy
                out_x[n_out] = ox
                out_k[n_out] = best
                out_t[n_out] = t
                out_margin[n_out] = best_margin
                n_out += 1
        group += 1
        if first_only and n_out > 0:
            break
    return out_y[:n_out], out_x[:n_out], out_k[:n_out], out_t[:n_out], out_margin[:n_out], oh, ow


def _check_input(spikes: SpikeList, L: LayerState):
    if spikes.channels != L.in_channels:
        raise ValueError(f"input has {spikes.channels} channels, layer expects {L.in_channels}")
    oh, ow = L.output_shape(spikes.height, spikes.width)
    if oh < 1 or ow < 1:
        raise ValueError("input is too small for the kernel/padding/stride")


def if_conv_forward(spikes: SpikeList, L: LayerState, first_only: bool = False) -> tuple[SpikeList, list[Winner]]:
    """Simulate the layer on one sample.

    Returns the output spikes (channel = kernel index) and the matching winner
    records in firing order. With ``first_only`` the simulation stops after
    the first instant at which any neuron fires, and only the strongest of
    the neurons firing then is reported.
    """
    _check_input(spikes, L)
    oy, ox, ok, ot, margin, oh, ow = _simulate(
        spikes.y, spikes.x, spikes.channel, spikes.t,
        np.ascontiguousarray(L.weights, dtype=np.float64),
        np.ascontiguousarray(L.thresholds, dtype=np.float64),
        spikes.height, spikes.width, L.stride, L.padding, first_only,
    )
    if first_only and ot.size > 1:
        # earliest instant only; max margin, then lowest position index
        j = int(np.argmax(margin))
        oy, ox, ok, ot = oy[j : j + 1], ox[j : j + 1], ok[j : j + 1], ot[j : j + 1]
    out = SpikeList(ox.copy(), oy.copy(), ok.copy(), ot.copy(), oh, ow, L.n_kernels, spikes.t_exposition)
    winners = [Winner(int(a), int(b), int(c), float(d)) for a, b, c, d in zip(oy, ox, ok, ot)]
    return out, winners


def _receptive_times(time_map: np.ndarray, L: LayerState, winner: Winner) -> np.ndarray:
    kh, kw = L.kernel_shape
    y0 = winner.y * L.stride - L.padding
    x0 = winner.x * L.stride - L.padding
    h, w, c = time_map.shape
    patch = np.full((kh, kw, c), np.inf)
    ys = slice(max(y0, 0), min(y0 + kh, h))
    xs = slice(max(x0, 0), min(x0 + kw, w))
    patch[ys.start - y0 : ys.stop - y0, xs.start - x0 : xs.stop - x0] = time_map[ys, xs]
    return patch


def stdp_update(
    L: LayerState,
    winner: Winner,
    spikes: SpikeList,
    p: StdpParams = StdpParams(),
    eta_w: float | None = None,
    time_map: np.ndarray | None = None,
) -> LayerState:
    """Soft-bounded multiplicative STDP on the winning kernel.

    A synapse is potentiated when its presynaptic spike precedes the winner
    by at most ``tau_stdp * t_exposition`` and depressed otherwise,
    including when it never spiked.
    """
    eta = p.eta_w if eta_w is None else eta_w
    tm = spikes.time_map() if time_map is None else time_map
    pre = _receptive_times(tm, L, winner)
    lag = winner.t - pre
    causal = (lag >= 0.0) & (lag <= p.tau_stdp * spikes.t_exposition)

    weights = L.weights.copy()
    w = weights[winner.kernel]
    span = p.w_max - p.w_min
    ltp = eta * np.exp(-p.beta * (w - p.w_min) / span)
    ltd = -eta * np.exp(-p.beta * (p.w_max - w) / span)
    weights[winner.kernel] = np.clip(w + np.where(causal, ltp, ltd), p.w_min, p.w_max)
    return replace(L, weights=weights)


def threshold_adapt(
    L: LayerState,
    winner: int | None,
    fire_time: float | None,
    tp: ThresholdParams = ThresholdParams(),
    eta_theta: float | None = None,
) -> LayerState:
    """Homeostasis: pull the winner's fire time towards ``t_expected`` and let
    every other kernel's threshold leak down slightly."""
    eta = tp.eta_theta if eta_theta is None else eta_theta
    th = L.thresholds.copy()
    losers = np.ones(th.size, dtype=bool)
    if winner is not None:
        th[winner] += eta * (tp.t_expected - fire_time)
        losers[winner] = False
    th[losers] -= eta * tp.leak
    np.maximum(th, tp.th_min, out=th)
    return replace(L, thresholds=th)


def silent_adapt(L: LayerState, tp: ThresholdParams, eta_theta: float, t_exposition: float = 1.0) -> LayerState:
    """Threshold update for a sample on which no neuron fired at all.

    Every kernel is treated as if it had fired at the end of the exposure,
    which lowers all thresholds by ``eta_theta * (t_exposition - t_expected)``.
    """
    th = np.maximum(L.thresholds + eta_theta * (tp.t_expected - t_exposition), tp.th_min)
    return replace(L, thresholds=th)


def init_layer(in_channels: int, cfg: LayerConfig, tp: ThresholdParams, p: StdpParams, rng: np.random.Generator) -> LayerState:
    k = cfg.kernel_size
    weights = rng.uniform(p.w_min, p.w_max, size=(cfg.n_kernels, k, k, in_channels))
    thresholds = np.maximum(rng.normal(tp.theta_mean, tp.theta_std, size=cfg.n_kernels), tp.th_min)
    return LayerState(weights, thresholds, cfg.stride, cfg.padding)


@dataclass
class EpochStats:
    epoch: int
    eta_w: float
    eta_theta: float
    n_winners: int
    mean_fire_time: float
    win_counts: np.ndarray = field(repr=False)
    sample_winners: np.ndarray = field(repr=False)  # winning kernel per sample index, -1 if silent


def train_layer(
    samples: Sequence[Frame],
    cfg: LayerConfig = LayerConfig(),
    p: StdpParams = StdpParams(),
    tp: ThresholdParams = ThresholdParams(),
    seed: int = 0,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> LayerState:
    """Unsupervised STDP training of one convolutional layer.

    Each epoch visits the samples in a seeded random order; per sample the
    first winner drives one STDP and one threshold update. Both learning
    rates are multiplied by ``alpha`` after every epoch.
    """
    if not samples:
        raise ValueError("train_layer needs at least one sample")
    channels = {f.channels for f in samples}
    if len(channels) != 1:
        raise ValueError("training samples differ in channel count")
    rng = np.random.default_rng(seed)
    L = init_layer(channels.pop(), cfg, tp, p, rng)
    encoded = [latency_encode(f, cfg.t_exposition) for f in samples]
    time_maps = [s.time_map() for s in encoded]
    eta_w, eta_th = p.eta_w, tp.eta_theta

    for epoch in range(p.n_epoch):
        fire_times = []
        wins = np.zeros(L.n_kernels, dtype=np.int64)
        sample_winners = np.full(len(encoded), -1, dtype=np.int64)
        for idx in rng.permutation(len(encoded)):
            _, winners = if_conv_forward(encoded[idx], L, first_only=True)
            if winners:
                win = winners[0]
                L = stdp_update(L, win, encoded[idx], p, eta_w, time_maps[idx])
                L = threshold_adapt(L, win.kernel, win.t, tp, eta_th)
                fire_times.append(win.t)
                wins[win.kernel] += 1
                sample_winners[idx] = win.kernel
            else:
                L = silent_adapt(L, tp, eta_th, cfg.t_exposition)
        stats = EpochStats(
            epoch, eta_w, eta_th, len(fire_times),
            float(np.mean(fire_times)) if fire_times else float("nan"), wins, sample_winners,
        )
        log.debug("epoch %d: %d winners, mean fire time %.4f", epoch, stats.n_winners, stats.mean_fire_time)
        if on_epoch is not None:
            on_epoch(stats)
        eta_w *= p.alpha
        eta_th *= p.alpha
    return L


def feature_map(out: SpikeList) -> np.ndarray:
    """``n_kernels x H x W`` map of ``1 - t`` at fired neurons, 0 elsewhere."""
    fmap = np.zeros((out.channels, out.height, out.width))
    fmap[out.channel, out.y, out.x] = 1.0 - out.t / out.t_exposition
    return fmap


def pool_and_flatten(out: SpikeList, window: int = 8) -> np.ndarray:
    """Max-pool ``1 - t`` over non-overlapping windows, flattened kernel-major.

    Partial windows at the right and bottom edges are pooled as they are.
    """
    if window < 1:
        raise ValueError("pooling window must be >= 1")
    fmap = feature_map(out)
    k, h, w = fmap.shape
    ph, pw = -(-h // window), -(-w // window)
    padded = np.zeros((k, ph * window, pw * window))
    padded[:, :h, :w] = fmap
    pooled = padded.reshape(k, ph, window, pw, window).max(axis=(2, 4))
    return pooled.ravel()


def extract_features(frame: Frame, L: LayerState, window: int = 8, t_exposition: float = 1.0) -> np.ndarray:
    out, _ = if_conv_forward(latency_encode(frame, t_exposition), L)
    return pool_and_flatten(out, window)


# --------------------------------------------------------------------------
# persistence


def _threshold_path(path: Path) -> Path:
    return path.with_name(path.stem + ".thresholds.staf")


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def save_layer(L: LayerState, path, meta: dict | None = None) -> None:
    """Weights go to ``path``, thresholds next to it, metadata to ``<path>.meta``."""
    path = Path(path)
    write_tensor(L.weights, path)
    write_tensor(L.thresholds, _threshold_path(path))
    info = {"stride": L.stride, "padding": L.padding, **(meta or {})}
    _meta_path(path).write_text("".join(f"{k} = {v}\n" for k, v in info.items()))


def read_meta(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def load_layer(path) -> LayerState:
    path = Path(path)
    meta = read_meta(_meta_path(path))
    weights = read_tensor(path).astype(np.float64)
    thresholds = read_tensor(_threshold_path(path)).astype(np.float64)
    return LayerState(weights, thresholds, int(meta.get("stride", 1)), int(meta.get("padding", 2)))
