"""End-to-end acceptance checks, each run at its stated tolerance.

Every test records a pass/fail line that is printed in the pytest summary.
The synthetic runs (criteria 8 to 10) share one dataset and take several
minutes in total.
"""

import math
import time

import numpy as np
import pytest

from spikeact.flow import FlowField, farneback_flow
from spikeact.fusion import deinterleave, early_fuse
from spikeact.harness import RunConfig, generate_synthetic, run_pipeline
from spikeact.representations import eg_tile_origin, mg_tile_origin, repr_cc, repr_eg, repr_mg
from spikeact.snn import LayerConfig, LayerState, StdpParams, ThresholdParams, Winner, dog_filter, stdp_update, train_layer
from spikeact.snn.coding import SpikeList, latency_encode
from spikeact.tensor import Frame

from acceptance_log import record
from oracles import dense_conv_same, early_fuse_index, gaussian_2d, shifted_pair, textured_frame


def test_flow_translation_oracle():
    rng = np.random.default_rng(2024)
    shifts = [(dx, dy) for dx in range(-3, 4) for dy in range(-3, 4)]
    inner = (slice(8, -8), slice(8, -8))
    worst_median, worst_max = 0.0, 0.0
    start = time.perf_counter()
    for _ in range(20):
        big = textured_frame(rng, 64, 64)
        for dx, dy in shifts:
            prev, nxt = shifted_pair(big, 64, 64, dx, dy)
            fl = farneback_flow(prev, nxt)
            err = np.hypot(fl.dx - dx, fl.dy - dy)[inner]
            worst_median = max(worst_median, float(np.median(err)))
            worst_max = max(worst_max, float(err.max()))
    elapsed = time.perf_counter() - start
    ok = worst_median <= 0.3 and worst_max <= 1.0 and elapsed < 30.0
    record(1, "flow oracle", ok,
           f"worst median EPE {worst_median:.3f} px, worst max {worst_max:.3f} px, {elapsed:.1f} s")
    assert ok


def test_fusion_equivalence():
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        h, w, c = (int(v) for v in rng.integers(1, 12, 3))
        frames = [Frame(rng.random((h, w, min(c, 4)))) for _ in range(n)]
        fused = early_fuse(frames)
        ok = np.array_equal(fused.data, early_fuse_index([f.data for f in frames])) and deinterleave(fused, n) == frames
        mismatches += not ok
    record(2, "fusion equivalence", mismatches == 0, f"{100 - mismatches}/100 stacks exact")
    assert mismatches == 0


def test_stdp_invariants():
    rng = np.random.default_rng(3)
    L = LayerState(rng.random((4, 3, 3, 2)), np.ones(4), 1, 1)
    inputs = [latency_encode(Frame(rng.random((5, 5, 2)) * (rng.random((5, 5, 2)) < 0.7))) for _ in range(16)]
    maps = [s.time_map() for s in inputs]
    params = [StdpParams(eta_w=e, beta=b) for e, b in zip(rng.uniform(0.001, 1.0, 32), rng.uniform(0.1, 5.0, 32))]
    lo, hi = np.inf, -np.inf
    for _ in range(100_000):
        i = int(rng.integers(16))
        win = Winner(int(rng.integers(5)), int(rng.integers(5)), int(rng.integers(4)), float(rng.random()))
        L = stdp_update(L, win, inputs[i], params[int(rng.integers(32))], time_map=maps[i])
        lo, hi = min(lo, L.weights.min()), max(hi, L.weights.max())
    one = LayerState(np.full((1, 1, 1, 1), 0.5), np.ones(1), 1, 0)
    pre = SpikeList(np.array([0], np.int32), np.array([0], np.int32), np.array([0], np.int32), np.array([0.45]), 1, 1, 1)
    dw = stdp_update(one, Winner(0, 0, 0, 0.5), pre).weights[0, 0, 0, 0] - 0.5
    ok = lo >= 0.0 and hi <= 1.0 and abs(dw - 0.1 * math.exp(-0.5)) <= 1e-9
    record(3, "STDP invariants", ok, f"weights stayed in [{lo:.4f}, {hi:.4f}], causal dw {dw:.12f}")
    assert ok


def test_threshold_convergence():
    # stationary distribution: one fixed 8x8 cross under fresh pixel noise
    rng = np.random.default_rng(0)
    base = np.zeros((8, 8))
    base[3, :] = base[:, 4] = 1.0
    base = dog_filter(Frame(base)).data
    samples = [Frame(np.clip(base + rng.normal(0, 0.05, base.shape), 0, 1)) for _ in range(32)]
    hist = []
    train_layer(samples, LayerConfig(n_kernels=8), StdpParams(n_epoch=100), ThresholdParams(), seed=0, on_epoch=hist.append)
    t = hist[-1].mean_fire_time
    ok = abs(t - 0.95) <= 0.05
    record(4, "threshold convergence", ok, f"last-epoch mean winner fire time {t:.4f} ({hist[-1].n_winners}/32 samples fired)")
    assert ok


def test_dog_equivalence():
    rng = np.random.default_rng(5)
    kernel = gaussian_2d(1.0, 7) - gaussian_2d(4.0, 7)
    worst = 0.0
    for _ in range(50):
        img = rng.random((int(rng.integers(8, 33)), int(rng.integers(8, 33))))
        r = dense_conv_same(img, kernel)
        r = np.where(np.abs(r) < 1e-6, 0.0, r)
        r = r / np.abs(r).max()
        ref = np.stack([np.maximum(r, 0), np.maximum(-r, 0)], axis=-1)
        worst = max(worst, float(np.abs(dog_filter(Frame(img)).data - ref).max()))
    ok = worst <= 1e-5
    record(5, "DoG equivalence", ok, f"max abs diff {worst:.2e} over 50 frames")
    assert ok


def test_cc_masking():
    rng = np.random.default_rng(6)
    # a spread around the threshold, plus exact boundary values
    dx = rng.normal(0, 25, (100, 100))
    dy = rng.normal(0, 25, (100, 100))
    dx[:10, :10] = 30.0
    dy[:10, :10] = 0.0
    dx[10:20, :10] = 12.5
    dy[10:20, :10] = -17.5
    gray = Frame(rng.random((100, 100)))
    third = repr_cc(FlowField(dx, dy), gray, theta=30.0).data[:, :, 2]
    moving = np.abs(dx) + np.abs(dy) > 30.0
    g = gray.data[:, :, 0]
    ok = bool(np.all(third[~moving] == 0) and np.all(third[moving] == g[moving]))
    record(6, "CC masking", ok, f"{moving.sum()} moving / {(~moving).sum()} still pixels checked")
    assert ok


def _one_hot_eg(i, h=8, w=8):
    flows = [FlowField(np.zeros((h, w)), np.zeros((h, w))) for _ in range(36)]
    dx = np.zeros((h, w))
    dx[2:6, 2:6] = 8.0
    flows[i] = FlowField(dx, np.zeros((h, w)))
    return flows


def _one_hot_mg(i, ch, h=4, w=4):
    flows = [FlowField(np.zeros((h, w)), np.zeros((h, w))) for _ in range(48)]
    v = np.full((h, w), 3.0)
    z = np.zeros((h, w))
    flows[i] = [FlowField(-v, z), FlowField(v, z), FlowField(z, -v), FlowField(z, v)][ch]
    return flows


def test_grid_bijection():
    eg_hits = []
    for i in range(36):
        tiles = repr_eg(_one_hot_eg(i)).data[:, :, 0].reshape(6, 8, 6, 8).any(axis=(1, 3))
        eg_hits.append(tuple(map(tuple, np.argwhere(tiles))))
    mg_hits = []
    for i in range(48):
        for ch in range(4):
            tiles = repr_mg(_one_hot_mg(i, ch)).data[:, :, 0].reshape(16, 4, 12, 4).any(axis=(1, 3))
            mg_hits.append(tuple(map(tuple, np.argwhere(tiles))))
    eg_ok = all(len(h) == 1 for h in eg_hits) and len(set(eg_hits)) == 36
    mg_ok = all(len(h) == 1 for h in mg_hits) and len(set(mg_hits)) == 192
    placement = all(h[0] == eg_tile_origin(i) for i, h in enumerate(eg_hits)) and all(
        mg_hits[4 * i + c][0] == mg_tile_origin(i, c) for i in range(48) for c in range(4)
    )
    ok = eg_ok and mg_ok and placement
    record(7, "grid bijection", ok, f"EG {len(set(eg_hits))}/36 tiles, MG {len(set(mg_hits))}/192 tiles, one tile per input")
    assert ok


# -- synthetic end-to-end runs ----------------------------------------------

# smaller than the full network settings so the ordering run fits the time budget
RUN_SETTINGS = {"n_kernels": "32", "n_epoch": "10", "grid_tile": "16x16"}
RAW_SETTINGS = {"method": "raw", "fusion": "none", "n_kernels": "32", "n_epoch": "10", "snn_train_samples": "400"}


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    start = time.perf_counter()
    data = generate_synthetic(root / "data", seed=0)
    return {"root": root, "data": data, "synth_seconds": time.perf_counter() - start, "runs": {}}


def _run(bench, name, settings):
    if name not in bench["runs"]:
        root = bench["root"]
        cfg = RunConfig.from_dict({"dataset": str(bench["data"]), "out": str(root / name),
                                   "cache_dir": str(root / f"cache_{name}"), "seed": "0", **settings})
        start = time.perf_counter()
        report = run_pipeline(cfg)
        bench["runs"][name] = (report, time.perf_counter() - start)
    return bench["runs"][name]


@pytest.mark.slow
def test_synthetic_ordering(bench):
    mg, t_mg = _run(bench, "mg", RUN_SETTINGS)
    raw, t_raw = _run(bench, "raw", RAW_SETTINGS)
    total = bench["synth_seconds"] + t_mg + t_raw
    ok = mg.accuracy >= 90.0 and mg.accuracy > raw.accuracy and total < 15 * 60
    record(8, "synthetic ordering", ok,
           f"MG {mg.accuracy:.2f}% vs raw {raw.accuracy:.2f}%, {total:.0f} s (MG {t_mg:.0f} s, raw {t_raw:.0f} s)")
    assert ok


@pytest.mark.slow
def test_sample_count_sensitivity(bench):
    full, _ = _run(bench, "mg", RUN_SETTINGS)
    half, _ = _run(bench, "mg_half", {**RUN_SETTINGS, "train_fraction": "0.5"})
    ok = half.accuracy < full.accuracy
    record(9, "sample-count sensitivity", ok,
           f"MG {full.accuracy:.2f}% with 200 training sequences, {half.accuracy:.2f}% with 100")
    assert ok


@pytest.mark.slow
def test_determinism(bench):
    first, _ = _run(bench, "mg", RUN_SETTINGS)
    # a second run with its own empty flow cache recomputes every stage
    second, _ = _run(bench, "mg_rerun", RUN_SETTINGS)
    a = (bench["root"] / "mg" / "confusion.csv").read_bytes()
    b = (bench["root"] / "mg_rerun" / "confusion.csv").read_bytes()
    ok = a == b
    record(10, "determinism", ok, f"confusion CSVs {'identical' if ok else 'differ'} ({len(a)} bytes)")
    assert ok
