"""Image-guided (joint) bilateral filtering of a displacement field.

Weights combine spatial proximity with guide-image intensity
similarity, so smoothing stops at anatomy edges: field components blend
only with neighbors that look alike in the guide.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import DispField
from .volume import GridMismatchError, Volume3


@dataclass(frozen=True)
class BFParams:
    """sigma_spatial in voxels, sigma_range in guide intensity units."""

    sigma_spatial: float = 1.5
    sigma_range: float = 0.1
    radius: int | None = None  # None -> ceil(3 * sigma_spatial)

    def __post_init__(self):
        if self.sigma_spatial <= 0 or self.sigma_range <= 0:
            raise ValueError("bilateral sigmas must be positive")
        r = self.radius
        if r is None:
            r = max(1, math.ceil(3.0 * self.sigma_spatial))
        if r < 1:
            raise ValueError(f"radius must be >= 1, got {r}")
        object.__setattr__(self, "radius", int(r))


def bilateral_filter(u: DispField, guide: Volume3, p: BFParams) -> DispField:
    """out(x) = sum_y w(x,y) u(y) / sum_y w(x,y) over the cubic window.

    w(x,y) = exp(-|x-y|^2 / 2 sigma_s^2) * exp(-(g(x)-g(y))^2 / 2 sigma_r^2)
    with y running over the edge-clamped window of the given radius.
    Each output voxel is a convex combination of window values, so the
    result is bounded by the window's min/max per component.
    """
    if guide.dims != u.dims:
        raise GridMismatchError(f"guide dims {guide.dims} != field dims {u.dims}")
    r = p.radius
    g = guide.data.astype(np.float64)
    ud = u.data.astype(np.float64)
    gp = np.pad(g, r, mode="edge")
    up = np.pad(ud, ((r, r), (r, r), (r, r), (0, 0)), mode="edge")

    inv2ss = 1.0 / (2.0 * p.sigma_spatial ** 2)
    inv2sr = 1.0 / (2.0 * p.sigma_range ** 2)
    nx, ny, nz = u.dims
    num = np.zeros_like(ud)
    den = np.zeros(g.shape, dtype=np.float64)
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            for dz in range(-r, r + 1):
                sw = math.exp(-(dx * dx + dy * dy + dz * dz) * inv2ss)
                sl = (slice(r + dx, r + dx + nx),
                      slice(r + dy, r + dy + ny),
                      slice(r + dz, r + dz + nz))
                diff = gp[sl] - g
                w = sw * np.exp(-(diff * diff) * inv2sr)
                den += w
                num += w[..., None] * up[sl]
    out = num / den[..., None]
    return DispField(out.astype(np.float32), u.spacing, u.origin)
