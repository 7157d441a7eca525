import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxreg import LabelMap, LandmarkSet, Volume3, downsample2


def test_volume_basic_construction():
    a = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    v = Volume3(a, spacing=(1.0, 2.0, 3.0), origin=(4.0, 5.0, 6.0))
    assert v.dims == (2, 3, 4)
    assert v.spacing == (1.0, 2.0, 3.0)
    assert v.origin == (4.0, 5.0, 6.0)
    assert v.data.dtype == np.float32


def test_volume_data_is_immutable():
    v = Volume3(np.zeros((2, 2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0


def test_volume_rejects_nan_inf_and_bad_shape():
    bad = np.zeros((2, 2, 2), dtype=np.float32)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        Volume3(bad)
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        Volume3(bad)
    with pytest.raises(ValueError):
        Volume3(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        Volume3(np.zeros((2, 2, 2), dtype=np.float32), spacing=(1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        Volume3(np.zeros((2, 2, 2), dtype=np.float32), spacing=(1.0, 1.0))


def test_labelmap_label_set_matches_distinct_values():
    lab = LabelMap(np.array([[[0, 1], [5, 5]], [[0, 0], [1, 0]]], dtype=np.int32))
    assert lab.label_set == (0, 1, 5)
    assert lab.data.dtype == np.int32


def test_labelmap_rejects_floats_and_negatives():
    with pytest.raises(ValueError):
        LabelMap(np.zeros((2, 2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        LabelMap(np.full((2, 2, 2), -1, dtype=np.int32))


def test_landmarks_shape_and_len():
    pts = LandmarkSet(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    assert len(pts) == 2
    with pytest.raises(ValueError):
        LandmarkSet(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        LandmarkSet(np.array([[np.nan, 0.0, 0.0]]))


# --- downsample2 ---------------------------------------------------------


def test_downsample_constant_stays_constant():
    v = Volume3(np.full((6, 4, 8), 2.5, dtype=np.float32))
    d = downsample2(v)
    assert d.dims == (3, 2, 4)
    assert np.all(d.data == np.float32(2.5))
    assert d.spacing == (2.0, 2.0, 2.0)


def test_downsample_ramp_block_means():
    # v(x) = x on 8^3: 2x2x2 block means along x are 0.5, 2.5, 4.5, 6.5
    x = np.arange(8, dtype=np.float32)
    v = Volume3(np.broadcast_to(x[:, None, None], (8, 8, 8)).copy())
    d = downsample2(v)
    expected = np.array([0.5, 2.5, 4.5, 6.5], dtype=np.float32)
    assert np.array_equal(d.data[:, 0, 0], expected)
    assert np.array_equal(d.data, np.broadcast_to(expected[:, None, None], (4, 4, 4)))


def test_downsample_odd_dims_pad_by_edge_replication():
    rng = np.random.default_rng(0)
    a = rng.random((5, 4, 3)).astype(np.float32)
    d = downsample2(Volume3(a))
    assert d.dims == (3, 2, 2)
    # oracle: pad odd axes by repeating the last plane, then 2x2x2 means
    p = np.pad(a, ((0, 1), (0, 0), (0, 1)), mode="edge").astype(np.float64)
    blocks = p.reshape(3, 2, 2, 2, 2, 2).mean(axis=(1, 3, 5))
    assert np.allclose(d.data, blocks, rtol=0, atol=1e-7)


def test_downsample_rejects_tiny_dims():
    with pytest.raises(ValueError):
        downsample2(Volume3(np.zeros((1, 4, 4), dtype=np.float32)))


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**31 - 1),
       st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_downsample_preserves_global_mean_even_dims(seed, hx, hy, hz):
    # dyadic-rational voxels (k/256) make every 2x2x2 mean exactly
    # representable at float32, so the global mean is preserved exactly
    rng = np.random.default_rng(seed)
    dims = (2 * hx, 2 * hy, 2 * hz)
    a = (rng.integers(0, 256, dims) / 256.0).astype(np.float32)
    v = Volume3(a)
    d = downsample2(v)
    assert abs(float(v.data.mean(dtype=np.float64))
               - float(d.data.mean(dtype=np.float64))) <= 1e-12


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_downsample_constant_property(seed, n):
    rng = np.random.default_rng(seed)
    c = np.float32(rng.uniform(-5, 5))
    dims = tuple(int(d) for d in rng.integers(2, 10, 3))
    d = downsample2(Volume3(np.full(dims, c, dtype=np.float32)))
    assert np.all(d.data == c)
    assert d.dims == tuple((n + 1) // 2 for n in dims)
