"""Displacement-field type and algebra.

A field u maps fixed-grid voxel coordinate p to position p + u(p) in the
moving image's voxel coordinates.  Components are stored in voxel units;
anything reporting millimeters multiplies by spacing at the edge.
"""

from dataclasses import dataclass

import numpy as np

from ._interp import grid_coords, trilinear
from .volume import GridMismatchError, Triple, Volume3, _as_triple, _freeze

Dims = tuple[int, int, int]


@dataclass(frozen=True)
class DispField:
    """Dense displacement field on the fixed-image grid.

    data has shape (nx, ny, nz, 3), float32, components (ux, uy, uz) in
    voxel units.  spacing/origin mirror the fixed image's metadata.
    """

    data: np.ndarray
    spacing: Triple = (1.0, 1.0, 1.0)
    origin: Triple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.float32)
        if a.ndim != 4 or a.shape[3] != 3:
            raise ValueError(f"field data must have shape (nx,ny,nz,3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("field contains NaN or Inf")
        sp = _as_triple(self.spacing)
        if min(sp) <= 0:
            raise ValueError(f"spacing must be positive, got {sp}")
        object.__setattr__(self, "data", _freeze(a))
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", _as_triple(self.origin))

    @property
    def dims(self) -> Dims:
        return self.data.shape[:3]  # type: ignore[return-value]


def identity_field(dims, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> DispField:
    """The zero displacement field (every point maps to itself)."""
    nx, ny, nz = (int(d) for d in dims)
    if min(nx, ny, nz) < 1:
        raise ValueError(f"dims must be positive, got {dims}")
    return DispField(np.zeros((nx, ny, nz, 3), dtype=np.float32), spacing, origin)


def _check_same_grid(a, b, what="operands"):
    if a.dims != b.dims:
        raise GridMismatchError(f"{what} have different dims: {a.dims} vs {b.dims}")
    if not np.allclose(a.spacing, b.spacing, rtol=0.0, atol=1e-9):
        raise GridMismatchError(f"{what} have different spacing: {a.spacing} vs {b.spacing}")


def sample_field(u: DispField, x, y, z) -> np.ndarray:
    """Trilinearly sample all three components of u at voxel coordinates.

    Returns an array shaped like broadcast(x,y,z) + (3,), float64.
    Out-of-range coordinates clamp to the boundary.
    """
    comps = [trilinear(u.data[..., c].astype(np.float64), x, y, z) for c in range(3)]
    return np.stack(comps, axis=-1)


def compose(u: DispField, v: DispField) -> DispField:
    """Combine two fields: w(p) = v(p) + u(p + v(p)).

    Warping by w equals warping by u and then warping the result by v,
    i.e. as point maps (id+w) = (id+u) ∘ (id+v).  u is sampled
    trilinearly with edge clamping.
    """
    _check_same_grid(u, v, "composed fields")
    vx, vy, vz = (v.data[..., c].astype(np.float64) for c in range(3))
    x, y, z = grid_coords(v.dims)
    w = sample_field(u, x + vx, y + vy, z + vz)
    w[..., 0] += vx
    w[..., 1] += vy
    w[..., 2] += vz
    return DispField(w.astype(np.float32), v.spacing, v.origin)


def upsample2(u: DispField, target_dims) -> DispField:
    """Double a field's resolution: trilinear upsampling with values x2.

    target_dims must be what downsample2 would have halved to the
    current dims, i.e. each target dim is 2n or 2n-1 for current dim n.
    Spacing halves; displacement values double (voxel-unit rescale).
    """
    td = tuple(int(d) for d in target_dims)
    for t, n in zip(td, u.dims):
        if t not in (2 * n - 1, 2 * n):
            raise ValueError(
                f"target dims {td} incompatible with doubling from {u.dims}")
    x, y, z = grid_coords(td)
    out = sample_field(u, x / 2.0, y / 2.0, z / 2.0) * 2.0
    return DispField(out.astype(np.float32),
                     spacing=tuple(s / 2.0 for s in u.spacing),
                     origin=u.origin)


def _det3(m):
    """Determinant of 3x3 matrices given as m[i][j] arrays (cofactor expansion)."""
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def jacobian_det(u: DispField) -> Volume3:
    """Per-voxel det(I + ∇u), central differences inside, one-sided at faces."""
    if min(u.dims) < 3:
        raise ValueError(f"jacobian_det needs dims >= 3 per axis, got {u.dims}")
    ud = u.data.astype(np.float64)
    # J[i][j] = d u_i / d axis_j  (+ identity on the diagonal)
    jac = [[None] * 3 for _ in range(3)]
    for i in range(3):
        gx, gy, gz = np.gradient(ud[..., i], axis=(0, 1, 2))
        jac[i][0], jac[i][1], jac[i][2] = gx, gy, gz
        jac[i][i] = jac[i][i] + 1.0
    det = _det3(jac)
    return Volume3(det.astype(np.float32), u.spacing, u.origin)


def _corner_dets(ud):
    """Jacobian determinants from one-sided differences at all 8 cell corners.

    ud: float64 (nx,ny,nz,3).  Yields (corner_offset, det_over_cells) with
    det arrays shaped (nx-1, ny-1, nz-1).  At corner offset (a,b,c) the
    j-th column is s_j * (phi(corner + s_j*e_j) - phi(corner)) where
    s_j = +1 when the offset bit is 0 (difference into the cell) and -1
    when it is 1, and phi(p) = p + u(p).
    """
    nx, ny, nz = ud.shape[:3]
    x, y, z = grid_coords((nx, ny, nz))
    phi = ud.copy()
    phi[..., 0] += x
    phi[..., 1] += y
    phi[..., 2] += z

    def cell(a, b, c):
        return phi[a:a + nx - 1, b:b + ny - 1, c:c + nz - 1, :]

    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                corner = cell(a, b, c)
                sx = 1.0 - 2.0 * a
                sy = 1.0 - 2.0 * b
                sz = 1.0 - 2.0 * c
                colx = sx * (cell(1 - a, b, c) - corner)
                coly = sy * (cell(a, 1 - b, c) - corner)
                colz = sz * (cell(a, b, 1 - c) - corner)
                m = [[colx[..., 0], coly[..., 0], colz[..., 0]],
                     [colx[..., 1], coly[..., 1], colz[..., 1]],
                     [colx[..., 2], coly[..., 2], colz[..., 2]]]
                yield (a, b, c), _det3(m)


def ndv(u: DispField) -> float:
    """Non-diffeomorphic volume as a percentage of the field's unit cells.

    Each unit cell gets 8 Jacobian determinants from corner-wise
    one-sided differences; its non-diffeomorphic volume is the mean of
    their negative parts.  Returns 100 * total / cell count.
    """
    if min(u.dims) < 2:
        raise ValueError(f"ndv needs dims >= 2 per axis, got {u.dims}")
    ud = u.data.astype(np.float64)
    nx, ny, nz = u.dims
    neg = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.float64)
    for _, det in _corner_dets(ud):
        neg += np.maximum(0.0, -det)
    return 100.0 * float(neg.sum(dtype=np.float64)) / (8.0 * neg.size)
