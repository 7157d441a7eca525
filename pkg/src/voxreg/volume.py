"""Core voxel-grid containers and the pyramid downsampler.

Arrays are indexed ``[x, y, z]``; the on-disk layout (x fastest) is the
I/O codec's concern, not ours.  Scalar volumes are stored float32 and
all reductions that feed numbers downstream accumulate in float64.
"""

from dataclasses import dataclass, field

import numpy as np

Triple = tuple[float, float, float]


class GridMismatchError(ValueError):
    """Two grids that must agree (dims and/or spacing) do not."""


def _as_triple(v) -> Triple:
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected 3 components, got {len(t)}")
    return t


def _freeze(a: np.ndarray) -> np.ndarray:
    # containers hand out views of this buffer; keep it immutable
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Volume3:
    """A 3D scalar image on a regular grid.

    Parameters
    ----------
    data : float32 array, shape (nx, ny, nz)
        One scalar per voxel.  Must be finite everywhere.
    spacing : (sx, sy, sz)
        Voxel size in mm, all strictly positive.
    origin : (ox, oy, oz)
        World position of voxel (0, 0, 0) in mm.
    """

    data: np.ndarray
    spacing: Triple = (1.0, 1.0, 1.0)
    origin: Triple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.float32)
        if a.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("volume data contains NaN or Inf")
        sp = _as_triple(self.spacing)
        if min(sp) <= 0:
            raise ValueError(f"spacing must be positive, got {sp}")
        object.__setattr__(self, "data", _freeze(a))
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", _as_triple(self.origin))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class LabelMap:
    """Integer segmentation labels on the same kind of grid as Volume3.

    0 is background by convention.  ``label_set`` is recomputed from the
    data at construction so it always equals the distinct values present.
    """

    data: np.ndarray
    spacing: Triple = (1.0, 1.0, 1.0)
    origin: Triple = (0.0, 0.0, 0.0)
    label_set: tuple = field(init=False)

    def __post_init__(self):
        a = np.ascontiguousarray(self.data)
        if not np.issubdtype(a.dtype, np.integer):
            raise ValueError(f"label data must be integer, got {a.dtype}")
        if a.ndim != 3:
            raise ValueError(f"label data must be 3D, got shape {a.shape}")
        if a.size and a.min() < 0:
            raise ValueError("labels must be non-negative")
        a = np.ascontiguousarray(a, dtype=np.int32)
        object.__setattr__(self, "data", _freeze(a))
        object.__setattr__(self, "spacing", _as_triple(self.spacing))
        object.__setattr__(self, "origin", _as_triple(self.origin))
        object.__setattr__(self, "label_set", tuple(int(v) for v in np.unique(a)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class LandmarkSet:
    """N corresponding points in world coordinates (mm), shape (N, 3)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"landmarks must have shape (N, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("landmark coordinates contain NaN or Inf")
        object.__setattr__(self, "points", _freeze(p))

    def __len__(self) -> int:
        return self.points.shape[0]


def _block_mean_axis(a: np.ndarray, axis: int) -> np.ndarray:
    """Average adjacent pairs along one axis; odd tails replicate the edge."""
    n = a.shape[axis]
    if n % 2:
        pad = [(0, 0)] * a.ndim
        pad[axis] = (0, 1)
        a = np.pad(a, pad, mode="edge")
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(0, None, 2)
    hi[axis] = slice(1, None, 2)
    return 0.5 * (a[tuple(lo)] + a[tuple(hi)])


def downsample2(vol: Volume3) -> Volume3:
    """Halve each dimension by 2x2x2 block averaging.

    Odd dimensions round up (``ceil(n/2)`` blocks) with the trailing
    block padded by edge replication.  Spacing doubles so the physical
    extent is preserved.  Block means are accumulated in float64 before
    the result is stored back at float32.
    """
    if min(vol.dims) < 2:
        raise ValueError(f"cannot downsample dims {vol.dims}; every axis must be >= 2")
    a = vol.data.astype(np.float64)
    for ax in range(3):
        a = _block_mean_axis(a, ax)
    return Volume3(a.astype(np.float32),
                   spacing=tuple(2.0 * s for s in vol.spacing),
                   origin=vol.origin)
