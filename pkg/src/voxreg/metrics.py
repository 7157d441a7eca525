"""Evaluation metrics: Dice, HD95, TRE, NDV, bundled into per-pair reports."""

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .field import DispField, ndv
from .sampler import inbounds_mask, transform_points, warp_labels
from .volume import GridMismatchError, LabelMap, LandmarkSet


def _require_same_grid(a: LabelMap, b: LabelMap):
    if a.dims != b.dims:
        raise GridMismatchError(f"label grids differ: {a.dims} vs {b.dims}")
    if not np.allclose(a.spacing, b.spacing, rtol=0.0, atol=1e-9):
        raise GridMismatchError(f"label spacings differ: {a.spacing} vs {b.spacing}")


def dice(a: LabelMap, b: LabelMap):
    """Per-label Dice 2|A∩B|/(|A|+|B|) over the union of non-zero labels.

    Returns (per_label dict, mean, sd) with sd taken across labels.
    A label missing from one map scores 0 for that label.
    """
    _require_same_grid(a, b)
    labels = sorted((set(a.label_set) | set(b.label_set)) - {0})
    per_label = {}
    for lb in labels:
        ma = a.data == lb
        mb = b.data == lb
        na = int(ma.sum())
        nb = int(mb.sum())
        inter = int(np.logical_and(ma, mb).sum())
        per_label[lb] = 2.0 * inter / (na + nb) if na + nb else 0.0
    vals = np.array(list(per_label.values()), dtype=np.float64)
    if vals.size == 0:
        return per_label, float("nan"), float("nan")
    return per_label, float(vals.mean()), float(vals.std())


def _boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Indices (N,3) of foreground voxels with a background face-neighbor.

    Voxels on the volume face count as boundary (their outside face is
    exposed).  6-connectivity.
    """
    interior = np.ones_like(mask)
    for ax in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        shifted_fwd = np.zeros_like(mask)
        shifted_bwd = np.zeros_like(mask)
        shifted_fwd[tuple(lo)] = mask[tuple(hi)]   # neighbor at +1
        shifted_bwd[tuple(hi)] = mask[tuple(lo)]   # neighbor at -1
        # volume faces keep the zeros: counts as exposed
        interior &= shifted_fwd & shifted_bwd
    boundary = mask & ~interior
    return np.argwhere(boundary)


def _nearest_rank_p95(values: np.ndarray) -> float:
    v = np.sort(values)
    rank = int(np.ceil(0.95 * v.size))
    return float(v[max(rank - 1, 0)])


def hd95(a: LabelMap, b: LabelMap, spacing=None, jobs: int = 1):
    """Symmetric 95th-percentile surface distance in mm, per label + mean.

    Pools boundary-voxel nearest-neighbor distances in both directions
    and takes the nearest-rank 95th percentile.  Labels empty in either
    map are skipped with a warning; returns (per_label dict, mean).
    """
    _require_same_grid(a, b)
    sp = np.asarray(spacing if spacing is not None else a.spacing, dtype=np.float64)
    labels = sorted((set(a.label_set) | set(b.label_set)) - {0})
    per_label = {}
    for lb in labels:
        pa = _boundary_voxels(a.data == lb)
        pb = _boundary_voxels(b.data == lb)
        if pa.size == 0 or pb.size == 0:
            warnings.warn(f"hd95: label {lb} empty in one map; skipped", stacklevel=2)
            continue
        wa = pa * sp
        wb = pb * sp
        d_ab = cKDTree(wb).query(wa, workers=jobs)[0]
        d_ba = cKDTree(wa).query(wb, workers=jobs)[0]
        per_label[lb] = _nearest_rank_p95(np.concatenate([d_ab, d_ba]))
    if not per_label:
        return per_label, float("nan")
    return per_label, float(np.mean(list(per_label.values()), dtype=np.float64))


def tre(fixed_pts: LandmarkSet, moving_pts: LandmarkSet, u: DispField,
        spacing=None):
    """Residual mm distance between mapped fixed landmarks and moving ones.

    Returns (mean, sd, n_excluded); fixed points outside the field grid
    are excluded from the statistics and counted.
    """
    if len(fixed_pts) != len(moving_pts):
        raise ValueError(f"landmark lists differ in length: "
                         f"{len(fixed_pts)} vs {len(moving_pts)}")
    keep = inbounds_mask(fixed_pts, u, spacing)
    n_excluded = int(np.count_nonzero(~keep))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # exclusion already handled here
        mapped = transform_points(fixed_pts, u, spacing)
    if not np.any(keep):
        return float("nan"), float("nan"), n_excluded
    d = np.linalg.norm(mapped.points[keep] - moving_pts.points[keep], axis=1)
    return float(d.mean(dtype=np.float64)), float(d.std()), n_excluded


@dataclass(frozen=True)
class MetricReport:
    """All per-pair numbers; fields are None when inputs were absent."""

    pair_id: str
    ndv_percent: float
    dice_mean: float | None = None
    dice_sd: float | None = None
    dice_per_label: dict | None = None
    hd95_mm: float | None = None
    hd95_per_label: dict | None = None
    tre_mm: float | None = None
    tre_sd: float | None = None
    tre_excluded: int | None = None

    def to_dict(self) -> dict:
        d = {"pair_id": self.pair_id, "ndv_percent": self.ndv_percent}
        if self.dice_per_label is not None:
            d["dice"] = {"mean": self.dice_mean,
                         "sd_across_labels": self.dice_sd,
                         "per_label": {str(k): v
                                       for k, v in self.dice_per_label.items()}}
        if self.hd95_per_label is not None:
            d["hd95_mm"] = {"mean": self.hd95_mm,
                            "per_label": {str(k): v
                                          for k, v in self.hd95_per_label.items()}}
        if self.tre_mm is not None:
            d["tre_mm"] = {"mean": self.tre_mm, "sd": self.tre_sd,
                           "excluded": self.tre_excluded}
        return d

    def format_row(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.4f}"
        return (f"pair={self.pair_id} dice={fmt(self.dice_mean)} "
                f"tre_mm={fmt(self.tre_mm)} ndv_percent={fmt(self.ndv_percent)} "
                f"hd95_mm={fmt(self.hd95_mm)}")


def evaluate_pair(fixed=None, moving=None, labels_f: LabelMap | None = None,
                  labels_m: LabelMap | None = None,
                  lm_f: LandmarkSet | None = None,
                  lm_m: LandmarkSet | None = None,
                  u: DispField | None = None, pair_id: str = "pair",
                  jobs: int = 1) -> MetricReport:
    """Evaluate one registered pair; metrics with missing inputs stay None.

    Dice/HD95 compare fixed labels against the moving labels warped by
    u; TRE maps the fixed landmarks through u toward the moving ones;
    NDV describes u itself.
    """
    if u is None:
        raise ValueError("evaluate_pair requires the displacement field u")
    kw: dict = {"pair_id": pair_id, "ndv_percent": ndv(u)}
    if labels_f is not None and labels_m is not None:
        warped = warp_labels(labels_m, u)
        per_label, mean, sd = dice(labels_f, warped)
        kw.update(dice_per_label=per_label, dice_mean=mean, dice_sd=sd)
        hd_per, hd_mean = hd95(labels_f, warped, jobs=jobs)
        kw.update(hd95_per_label=hd_per, hd95_mm=hd_mean)
    if lm_f is not None and lm_m is not None:
        t_mean, t_sd, t_exc = tre(lm_f, lm_m, u)
        kw.update(tre_mm=t_mean, tre_sd=t_sd, tre_excluded=t_exc)
    return MetricReport(**kw)


def write_report_json(report: MetricReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


_CSV_COLUMNS = ("pair", "dice", "tre_mm", "ndv_percent", "hd95_mm")


def write_summary_csv(reports, path) -> None:
    """Table-style CSV: one row per pair, mean/sd rows across cases when >1.

    Cells use fixed 4-decimal formatting; absent metrics are blank.
    """
    def fmt(v):
        return "" if v is None or (isinstance(v, float) and np.isnan(v)) \
            else f"{v:.4f}"

    cols = [("dice", "dice_mean"), ("tre_mm", "tre_mm"),
            ("ndv_percent", "ndv_percent"), ("hd95_mm", "hd95_mm")]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_CSV_COLUMNS)
        for r in reports:
            w.writerow([r.pair_id] + [fmt(getattr(r, attr)) for _, attr in cols])
        if len(reports) > 1:
            for stat, reduce in (("mean", np.mean), ("sd", np.std)):
                row = [stat]
                for _, attr in cols:
                    vals = [getattr(r, attr) for r in reports
                            if getattr(r, attr) is not None]
                    row.append(fmt(float(reduce(vals))) if vals else "")
                w.writerow(row)
