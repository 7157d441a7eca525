"""Spatial transformation of volumes, label maps, and landmarks."""

import enum
import warnings

import numpy as np

from ._interp import grid_coords, nearest, trilinear
from .field import DispField, sample_field
from .volume import GridMismatchError, LabelMap, LandmarkSet, Volume3


class InterpMode(enum.Enum):
    LINEAR = "linear"
    NEAREST = "nearest"


def _check_grid(vol, u):
    if vol.dims != u.dims:
        raise GridMismatchError(f"volume dims {vol.dims} != field dims {u.dims}")


def _warped_coords(u: DispField):
    x, y, z = grid_coords(u.dims)
    ud = u.data.astype(np.float64)
    return x + ud[..., 0], y + ud[..., 1], z + ud[..., 2]


def warp(vol: Volume3, u: DispField, mode: InterpMode = InterpMode.LINEAR) -> Volume3:
    """Resample vol through u: out(p) = vol(p + u(p)).

    Out-of-range reads clamp to the boundary voxel.  LINEAR is exact on
    globally linear images away from the clamped border.
    """
    _check_grid(vol, u)
    wx, wy, wz = _warped_coords(u)
    data = vol.data.astype(np.float64)
    if mode is InterpMode.LINEAR:
        out = trilinear(data, wx, wy, wz)
    elif mode is InterpMode.NEAREST:
        out = nearest(data, wx, wy, wz)
    else:
        raise ValueError(f"unknown interpolation mode {mode!r}")
    return Volume3(out.astype(np.float32), vol.spacing, vol.origin)


def warp_labels(lab: LabelMap, u: DispField) -> LabelMap:
    """Nearest-neighbor warp of a label map (never blends label values)."""
    _check_grid(lab, u)
    wx, wy, wz = _warped_coords(u)
    out = nearest(lab.data, wx, wy, wz)
    return LabelMap(out, lab.spacing, lab.origin)


def inbounds_mask(pts: LandmarkSet, u: DispField, spacing=None) -> np.ndarray:
    """True where a world-mm point falls inside the field's voxel grid."""
    sp = np.asarray(spacing if spacing is not None else u.spacing, dtype=np.float64)
    q = (pts.points - np.asarray(u.origin)) / sp
    hi = np.asarray(u.dims, dtype=np.float64) - 1.0
    return np.all((q >= 0.0) & (q <= hi), axis=1)


def transform_points(pts: LandmarkSet, u: DispField, spacing=None) -> LandmarkSet:
    """Map landmarks through the field: p' = p + spacing*u(p_voxel).

    Points are world mm; the field is sampled trilinearly at the
    fractional voxel coordinate (p - origin) / spacing.  Out-of-bounds
    points are still transformed (clamped sample) but a warning reports
    how many there were; TRE computation excludes them.
    """
    sp = np.asarray(spacing if spacing is not None else u.spacing, dtype=np.float64)
    if sp.shape != (3,) or np.any(sp <= 0):
        raise ValueError(f"spacing must be 3 positive values, got {sp}")
    q = (pts.points - np.asarray(u.origin)) / sp
    n_out = int(np.count_nonzero(~inbounds_mask(pts, u, sp)))
    if n_out:
        warnings.warn(f"{n_out} landmark(s) outside the field grid; "
                      "TRE will exclude them", stacklevel=2)
    disp = sample_field(u, q[:, 0], q[:, 1], q[:, 2])
    return LandmarkSet(pts.points + disp * sp)
