"""Trilinear/nearest gather primitives shared by the sampler and field algebra.

All functions take a raw 3D float64 array plus coordinate arrays of any
common shape, clamp out-of-range coordinates to the grid boundary, and
are fully vectorized.  Nothing here knows about spacing or world frames.
"""

import numpy as np


def _axis_indices(coord, n):
    """Clamped cell index, fraction, and out-of-range mask for one axis."""
    s = np.clip(coord, 0.0, n - 1.0)
    if n == 1:
        i0 = np.zeros(s.shape, dtype=np.intp)
        return i0, i0, np.zeros_like(s), (coord < 0) | (coord > 0)
    i0 = np.floor(s).astype(np.intp)
    # at s == n-1 keep the last full cell so the fraction stays in [0,1]
    np.minimum(i0, n - 2, out=i0)
    f = s - i0
    return i0, i0 + 1, f, (coord < 0.0) | (coord > n - 1.0)


def trilinear(data, x, y, z):
    """Sample ``data[x, y, z]`` trilinearly at fractional coordinates.

    Coordinates outside the grid clamp to the boundary value.  Exact
    grid points reproduce stored values bit-for-bit.
    """
    nx, ny, nz = data.shape
    ix0, ix1, fx, _ = _axis_indices(x, nx)
    iy0, iy1, fy, _ = _axis_indices(y, ny)
    iz0, iz1, fz, _ = _axis_indices(z, nz)
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz

    c000 = data[ix0, iy0, iz0]
    c100 = data[ix1, iy0, iz0]
    c010 = data[ix0, iy1, iz0]
    c110 = data[ix1, iy1, iz0]
    c001 = data[ix0, iy0, iz1]
    c101 = data[ix1, iy0, iz1]
    c011 = data[ix0, iy1, iz1]
    c111 = data[ix1, iy1, iz1]

    return (gz * (gy * (gx * c000 + fx * c100) + fy * (gx * c010 + fx * c110))
            + fz * (gy * (gx * c001 + fx * c101) + fy * (gx * c011 + fx * c111)))


def trilinear_with_grad(data, x, y, z):
    """Trilinear sample plus the interpolant's spatial derivative.

    Returns ``(value, d/dx, d/dy, d/dz)``.  Where a coordinate is
    clamped the corresponding derivative is 0 (the sampled value no
    longer responds to that coordinate).
    """
    nx, ny, nz = data.shape
    ix0, ix1, fx, mx = _axis_indices(x, nx)
    iy0, iy1, fy, my = _axis_indices(y, ny)
    iz0, iz1, fz, mz = _axis_indices(z, nz)
    gx, gy, gz = 1.0 - fx, 1.0 - fy, 1.0 - fz

    c000 = data[ix0, iy0, iz0]
    c100 = data[ix1, iy0, iz0]
    c010 = data[ix0, iy1, iz0]
    c110 = data[ix1, iy1, iz0]
    c001 = data[ix0, iy0, iz1]
    c101 = data[ix1, iy0, iz1]
    c011 = data[ix0, iy1, iz1]
    c111 = data[ix1, iy1, iz1]

    # interpolate pairwise down the axes, keeping per-axis differences
    a00 = gx * c000 + fx * c100
    a10 = gx * c010 + fx * c110
    a01 = gx * c001 + fx * c101
    a11 = gx * c011 + fx * c111
    val = gz * (gy * a00 + fy * a10) + fz * (gy * a01 + fy * a11)

    dx = (gz * (gy * (c100 - c000) + fy * (c110 - c010))
          + fz * (gy * (c101 - c001) + fy * (c111 - c011)))
    dy = gz * (a10 - a00) + fz * (a11 - a01)
    dz = (gy * a01 + fy * a11) - (gy * a00 + fy * a10)

    dx[mx] = 0.0
    dy[my] = 0.0
    dz[mz] = 0.0
    return val, dx, dy, dz


def nearest(data, x, y, z):
    """Nearest-neighbor sample with half-up rounding and edge clamping.

    Ties round toward +inf (floor(s + 0.5)); this is the documented
    convention so label-warp oracles can reproduce it exactly.
    """
    nx, ny, nz = data.shape
    ix = np.clip(np.floor(x + 0.5).astype(np.intp), 0, nx - 1)
    iy = np.clip(np.floor(y + 0.5).astype(np.intp), 0, ny - 1)
    iz = np.clip(np.floor(z + 0.5).astype(np.intp), 0, nz - 1)
    return data[ix, iy, iz]


def grid_coords(dims):
    """Open meshgrid of float64 voxel coordinates for a (nx,ny,nz) grid."""
    nx, ny, nz = dims
    x = np.arange(nx, dtype=np.float64)[:, None, None]
    y = np.arange(ny, dtype=np.float64)[None, :, None]
    z = np.arange(nz, dtype=np.float64)[None, None, :]
    return x, y, z
