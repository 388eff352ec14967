import numpy as np
import pytest

from spikeact.fusion import FusionMode, deinterleave, early_fuse, late_fuse
from spikeact.tensor import Frame

from oracles import early_fuse_index


def _frames(rng, n, h=4, w=3, c=1):
    return [Frame(rng.random((h, w, c))) for _ in range(n)]


def test_single_frame_identity():
    f = _frames(np.random.default_rng(0), 1)
    assert early_fuse(f) == f[0]


def test_two_frame_row_order():
    a = Frame(np.array([[0.1, 0.1], [0.2, 0.2]]))
    b = Frame(np.array([[0.7, 0.7], [0.8, 0.8]]))
    rows = early_fuse([a, b]).data[:, 0, 0]
    assert np.allclose(rows, [0.1, 0.7, 0.2, 0.8])


def test_ten_frames_row_57():
    frames = _frames(np.random.default_rng(1), 10, h=20, w=5)
    out = early_fuse(frames)
    assert out.height == 200
    assert np.array_equal(out.data[57], frames[7].data[5])


def test_matches_index_oracle_and_round_trips():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(1, 11))
        frames = _frames(rng, n, int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 4)))
        out = early_fuse(frames)
        assert np.array_equal(out.data, early_fuse_index([f.data for f in frames]))
        assert deinterleave(out, n) == frames


def test_errors():
    with pytest.raises(ValueError):
        early_fuse([])
    with pytest.raises(ValueError):
        early_fuse([Frame(np.zeros((2, 2))), Frame(np.zeros((3, 2)))])
    with pytest.raises(ValueError):
        deinterleave(Frame(np.zeros((5, 2))), 2)
    with pytest.raises(ValueError):
        FusionMode("early", 0)


def test_late_fuse_examples():
    v = np.arange(4.0)
    assert np.array_equal(late_fuse([v]), v)
    assert late_fuse([np.array([1, 2]), np.array([3])], require_equal=False).tolist() == [1, 2, 3]
    with pytest.raises(ValueError):
        late_fuse([np.array([1, 2]), np.array([3])])
    L = 7
    vecs = [np.arange(L) + 100 * i for i in range(10)]
    out = late_fuse(vecs)
    assert out.size == 10 * L and out[3 * L + 2] == vecs[3][2]


def test_fusing_divides_sample_count():
    frames = _frames(np.random.default_rng(3), 40)
    fused = [early_fuse(frames[i : i + 10]) for i in range(0, 40, 10)]
    assert len(fused) == len(frames) // 10
