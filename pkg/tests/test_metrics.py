import json

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from voxreg import (DispField, LabelMap, LandmarkSet, MetricReport, dice,
                    evaluate_pair, hd95, identity_field, tre,
                    write_report_json, write_summary_csv)
from voxreg.volume import GridMismatchError


def _labmap(data, spacing=(1.0, 1.0, 1.0)):
    return LabelMap(np.asarray(data, dtype=np.int32), spacing=spacing)


def _cube(dims, lo, size, label=1):
    d = np.zeros(dims, dtype=np.int32)
    d[lo[0]:lo[0] + size, lo[1]:lo[1] + size, lo[2]:lo[2] + size] = label
    return d


# ---------------------------------------------------------------- dice

def test_dice_identical_and_disjoint():
    a = _labmap(_cube((10, 10, 10), (1, 1, 1), 4))
    per, mean, sd = dice(a, a)
    assert per == {1: 1.0} and mean == 1.0 and sd == 0.0
    b = _labmap(_cube((10, 10, 10), (6, 6, 6), 4))
    per, mean, _ = dice(a, b)
    assert per == {1: 0.0} and mean == 0.0


def test_dice_half_overlap_cube():
    # 4^3 cube shifted by 2 in x: |A∩B| = 2*4*4, |A|=|B|=64 -> 0.5
    a = _labmap(_cube((12, 12, 12), (2, 2, 2), 4))
    b = _labmap(_cube((12, 12, 12), (4, 2, 2), 4))
    per, mean, sd = dice(a, b)
    assert per[1] == 0.5 and mean == 0.5 and sd == 0.0


def test_dice_counting_oracle_and_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = _labmap(rng.integers(0, 4, size=(9, 8, 7)))
        b = _labmap(rng.integers(0, 4, size=(9, 8, 7)))
        per, mean, sd = dice(a, b)
        labels = sorted((set(np.unique(a.data)) | set(np.unique(b.data))) - {0})
        assert sorted(per) == labels
        vals = []
        for lb in labels:
            # independent path: flat index sets
            ia = set(np.flatnonzero(a.data == lb).tolist())
            ib = set(np.flatnonzero(b.data == lb).tolist())
            want = 2.0 * len(ia & ib) / (len(ia) + len(ib))
            assert per[lb] == pytest.approx(want, abs=1e-12)
            vals.append(want)
        assert mean == pytest.approx(np.mean(vals), abs=1e-12)
        assert sd == pytest.approx(np.std(vals), abs=1e-12)
        per_ba, mean_ba, _ = dice(b, a)
        assert per_ba == per and mean_ba == mean


def test_dice_label_missing_from_one_map_scores_zero():
    a = _labmap(_cube((8, 8, 8), (1, 1, 1), 3, label=2))
    b = _labmap(np.zeros((8, 8, 8)))
    per, mean, _ = dice(a, b)
    assert per == {2: 0.0} and mean == 0.0


def test_dice_all_background_gives_nan_mean():
    z = _labmap(np.zeros((5, 5, 5)))
    per, mean, sd = dice(z, z)
    assert per == {} and np.isnan(mean) and np.isnan(sd)


def test_dice_grid_mismatch():
    a = _labmap(np.zeros((5, 5, 5)))
    b = _labmap(np.zeros((5, 5, 6)))
    with pytest.raises(GridMismatchError):
        dice(a, b)
    c = _labmap(np.zeros((5, 5, 5)), spacing=(2.0, 1.0, 1.0))
    with pytest.raises(GridMismatchError):
        dice(a, c)


# ---------------------------------------------------------------- hd95

def _boundary_oracle(mask):
    """Per-voxel 6-neighbor check; volume faces count as exposed."""
    pts = []
    nx, ny, nz = mask.shape
    for x, y, z in np.argwhere(mask):
        exposed = False
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                           (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            px, py, pz = x + dx, y + dy, z + dz
            if not (0 <= px < nx and 0 <= py < ny and 0 <= pz < nz):
                exposed = True
            elif not mask[px, py, pz]:
                exposed = True
        if exposed:
            pts.append((x, y, z))
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


def _hd95_oracle(a, b, spacing):
    sp = np.asarray(spacing, dtype=np.float64)
    out = {}
    for lb in sorted((set(np.unique(a)) | set(np.unique(b))) - {0}):
        pa = _boundary_oracle(a == lb) * sp
        pb = _boundary_oracle(b == lb) * sp
        if pa.size == 0 or pb.size == 0:
            continue
        d = cdist(pa, pb)
        pooled = np.sort(np.concatenate([d.min(axis=1), d.min(axis=0)]))
        out[lb] = float(pooled[int(np.ceil(0.95 * pooled.size)) - 1])
    return out


def test_hd95_identical_is_zero():
    a = _labmap(_cube((10, 10, 10), (2, 2, 2), 5))
    per, mean = hd95(a, a)
    assert per == {1: 0.0} and mean == 0.0


def test_hd95_parallel_planes():
    # single-voxel slabs 3 voxels apart: every pooled distance is 3
    a = np.zeros((10, 8, 8), dtype=np.int32)
    b = np.zeros((10, 8, 8), dtype=np.int32)
    a[2], b[5] = 1, 1
    per, mean = hd95(_labmap(a), _labmap(b))
    assert per[1] == 3.0 and mean == 3.0
    # anisotropic spacing scales the axis
    per2, _ = hd95(_labmap(a, spacing=(2.0, 1.0, 1.0)),
                   _labmap(b, spacing=(2.0, 1.0, 1.0)))
    assert per2[1] == 6.0
    # spacing= argument overrides the maps' own
    per3, _ = hd95(_labmap(a), _labmap(b), spacing=(0.5, 1.0, 1.0))
    assert per3[1] == 1.5


def test_hd95_matches_bruteforce_oracle():
    rng = np.random.default_rng(11)
    for trial in range(6):
        dims = tuple(rng.integers(6, 13, size=3))
        a = rng.integers(0, 3, size=dims).astype(np.int32)
        b = rng.integers(0, 3, size=dims).astype(np.int32)
        spacing = tuple(rng.uniform(0.5, 2.0, size=3))
        per, mean = hd95(_labmap(a, spacing), _labmap(b, spacing))
        want = _hd95_oracle(a, b, spacing)
        assert sorted(per) == sorted(want)
        for lb in want:
            assert per[lb] == pytest.approx(want[lb], abs=1e-9)
        assert mean == pytest.approx(np.mean(list(want.values())), abs=1e-9)


def test_hd95_symmetry():
    rng = np.random.default_rng(13)
    a = _labmap(rng.integers(0, 2, size=(9, 9, 9)))
    b = _labmap(rng.integers(0, 2, size=(9, 9, 9)))
    assert hd95(a, b) == hd95(b, a)


def test_hd95_empty_label_warns_and_skips():
    a = _labmap(_cube((8, 8, 8), (1, 1, 1), 3, label=1)
                + _cube((8, 8, 8), (5, 5, 5), 2, label=2))
    b = _labmap(_cube((8, 8, 8), (1, 1, 1), 3, label=1))
    with pytest.warns(UserWarning, match="label 2"):
        per, mean = hd95(a, b)
    assert sorted(per) == [1] and mean == per[1]
    # everything skipped -> nan mean
    with pytest.warns(UserWarning):
        per, mean = hd95(_labmap(_cube((8, 8, 8), (1, 1, 1), 3)),
                         _labmap(np.zeros((8, 8, 8))))
    assert per == {} and np.isnan(mean)


# ----------------------------------------------------------------- tre

def test_tre_zero_field_identical_points():
    pts = LandmarkSet(np.array([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]]))
    u = identity_field((8, 8, 8))
    mean, sd, exc = tre(pts, pts, u)
    assert mean == 0.0 and sd == 0.0 and exc == 0


def test_tre_constant_shift():
    fixed = LandmarkSet(np.array([[1.0, 1.0, 1.0], [2.0, 3.0, 1.0]]))
    data = np.zeros((8, 8, 8, 3), dtype=np.float32)
    data[..., 0] = 3.0
    u = DispField(data)
    # moving sits exactly where the field sends the fixed points
    moving = LandmarkSet(fixed.points + [3.0, 0.0, 0.0])
    mean, sd, exc = tre(fixed, moving, u)
    assert mean == pytest.approx(0.0, abs=1e-6) and exc == 0
    # against themselves the residual is the shift length
    mean, sd, exc = tre(fixed, fixed, u)
    assert mean == pytest.approx(3.0, abs=1e-6) and sd == pytest.approx(0.0, abs=1e-6)


def test_tre_spacing_converts_to_mm():
    fixed = LandmarkSet(np.array([[2.0, 2.0, 2.0]]))
    data = np.zeros((6, 6, 6, 3), dtype=np.float32)
    data[..., 1] = 1.0  # one voxel along y
    u = DispField(data, spacing=(2.0, 2.0, 2.0))
    mean, _, _ = tre(fixed, fixed, u)
    assert mean == pytest.approx(2.0, abs=1e-6)  # 1 voxel * 2 mm


def test_tre_matches_trilinear_oracle():
    rng = np.random.default_rng(17)
    data = rng.standard_normal((7, 7, 7, 3)).astype(np.float32)
    u = DispField(data)
    fixed = LandmarkSet(rng.uniform(0.5, 5.5, size=(20, 3)))
    moving = LandmarkSet(rng.uniform(0.0, 6.0, size=(20, 3)))
    mean, sd, exc = tre(fixed, moving, u)
    assert exc == 0
    # manual trilinear sampling of the displacement at each fixed point
    ds = []
    for p, q in zip(fixed.points, moving.points):
        i = np.floor(p).astype(int)
        f = p - i
        disp = np.zeros(3)
        for cx in (0, 1):
            for cy in (0, 1):
                for cz in (0, 1):
                    w = ((f[0] if cx else 1 - f[0])
                         * (f[1] if cy else 1 - f[1])
                         * (f[2] if cz else 1 - f[2]))
                    disp += w * data[i[0] + cx, i[1] + cy, i[2] + cz].astype(np.float64)
        ds.append(np.linalg.norm(p + disp - q))
    assert mean == pytest.approx(np.mean(ds), abs=1e-5)
    assert sd == pytest.approx(np.std(ds), abs=1e-5)


def test_tre_excludes_out_of_grid_points():
    fixed = LandmarkSet(np.array([[1.0, 1.0, 1.0], [20.0, 1.0, 1.0],
                                  [2.0, 2.0, 2.0]]))
    moving = LandmarkSet(fixed.points.copy())
    u = identity_field((8, 8, 8))
    mean, sd, exc = tre(fixed, moving, u)
    assert exc == 1 and mean == 0.0
    # all excluded -> nan stats, full count
    far = LandmarkSet(np.full((2, 3), 50.0))
    mean, sd, exc = tre(far, far, u)
    assert exc == 2 and np.isnan(mean) and np.isnan(sd)


def test_tre_length_mismatch():
    a = LandmarkSet(np.zeros((3, 3)))
    b = LandmarkSet(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="length"):
        tre(a, b, identity_field((5, 5, 5)))


# -------------------------------------------------- reports and files

def test_evaluate_pair_identity_everything():
    labs = _labmap(_cube((10, 10, 10), (2, 2, 2), 5))
    pts = LandmarkSet(np.array([[3.0, 3.0, 3.0], [5.0, 4.0, 6.0]]))
    u = identity_field((10, 10, 10))
    rep = evaluate_pair(labels_f=labs, labels_m=labs, lm_f=pts, lm_m=pts,
                        u=u, pair_id="p0")
    assert rep.pair_id == "p0"
    assert rep.dice_mean == 1.0 and rep.dice_per_label == {1: 1.0}
    assert rep.hd95_mm == 0.0
    assert rep.tre_mm == 0.0 and rep.tre_excluded == 0
    assert rep.ndv_percent == 0.0


def test_evaluate_pair_optional_inputs_stay_none():
    u = identity_field((6, 6, 6))
    rep = evaluate_pair(u=u)
    assert rep.dice_mean is None and rep.hd95_mm is None and rep.tre_mm is None
    assert rep.ndv_percent == 0.0
    with pytest.raises(ValueError):
        evaluate_pair(labels_f=None, labels_m=None)


def test_format_row_fixed_decimals():
    rep = MetricReport(pair_id="case7", ndv_percent=0.0, dice_mean=0.89304,
                       tre_mm=1.21199, hd95_mm=2.0)
    assert rep.format_row() == ("pair=case7 dice=0.8930 tre_mm=1.2120 "
                                "ndv_percent=0.0000 hd95_mm=2.0000")
    sparse = MetricReport(pair_id="x", ndv_percent=1.25)
    assert sparse.format_row() == ("pair=x dice= tre_mm= "
                                   "ndv_percent=1.2500 hd95_mm=")


def test_write_report_json(tmp_path):
    rep = MetricReport(pair_id="p", ndv_percent=0.5, dice_mean=0.9,
                       dice_sd=0.01, dice_per_label={1: 0.9},
                       tre_mm=1.0, tre_sd=0.2, tre_excluded=0)
    path = tmp_path / "report.json"
    write_report_json(rep, path)
    got = json.loads(path.read_text())
    assert got["pair_id"] == "p"
    assert got["ndv_percent"] == 0.5
    assert got["dice"]["per_label"] == {"1": 0.9}
    assert got["tre_mm"]["excluded"] == 0
    assert "hd95_mm" not in got


def test_write_summary_csv(tmp_path):
    r1 = MetricReport(pair_id="a", ndv_percent=0.0, dice_mean=0.8,
                      tre_mm=2.0, hd95_mm=3.0)
    r2 = MetricReport(pair_id="b", ndv_percent=1.0, dice_mean=0.6,
                      tre_mm=4.0, hd95_mm=5.0)
    path = tmp_path / "summary.csv"
    write_summary_csv([r1, r2], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "pair,dice,tre_mm,ndv_percent,hd95_mm"
    assert lines[1] == "a,0.8000,2.0000,0.0000,3.0000"
    assert lines[2] == "b,0.6000,4.0000,1.0000,5.0000"
    assert lines[3] == "mean,0.7000,3.0000,0.5000,4.0000"
    assert lines[4].startswith("sd,0.1000,1.0000,0.5000,1.0000")
    # a single report gets no summary rows
    write_summary_csv([r1], path)
    assert len(path.read_text().splitlines()) == 2


def test_write_summary_csv_blank_for_missing(tmp_path):
    r = MetricReport(pair_id="only_ndv", ndv_percent=0.0)
    path = tmp_path / "s.csv"
    write_summary_csv([r], path)
    assert path.read_text().splitlines()[1] == "only_ndv,,,0.0000,"
