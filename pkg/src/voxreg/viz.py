"""Raster visualization of a displacement field on one slice.

Left panel: the identity grid advected by the in-plane field (bent
lines where the field moves things).  Right panel: subsampled arrow
glyphs, over the background image slice when one is given.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .field import DispField
from .volume import Volume3

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
# in-plane axes (horizontal, vertical) for each slicing axis
_PLANE = {"x": (1, 2), "y": (0, 2), "z": (0, 1)}


def _slice_plane(arr4, axis, k):
    idx = [slice(None)] * 3
    idx[_AXIS_INDEX[axis]] = k
    return arr4[tuple(idx)]


def render_field(u: DispField, background: Volume3 | None = None,
                 axis: str = "z", slice_index: int | None = None,
                 arrow_stride: int = 8, grid_step: int = 4):
    """Build the two-panel figure; caller saves or closes it."""
    if axis not in _AXIS_INDEX:
        raise ValueError(f"axis must be one of x/y/z, got {axis!r}")
    n_axis = u.dims[_AXIS_INDEX[axis]]
    if slice_index is None:
        slice_index = n_axis // 2
    if not 0 <= slice_index < n_axis:
        raise ValueError(f"slice {slice_index} out of range [0, {n_axis})")

    ha, va = _PLANE[axis]
    ud = u.data.astype(np.float64)
    uh = _slice_plane(ud[..., ha], axis, slice_index)
    uv = _slice_plane(ud[..., va], axis, slice_index)
    nh, nv = uh.shape

    fig, (ax_grid, ax_arrows) = plt.subplots(
        1, 2, figsize=(11.0, 5.5), constrained_layout=True)

    # panel (a): identity grid lines advected by the in-plane field
    hh = np.arange(nh, dtype=np.float64)
    vv = np.arange(nv, dtype=np.float64)
    for h0 in range(0, nh, grid_step):
        ax_grid.plot(h0 + uh[h0, :], vv + uv[h0, :],
                     color="tab:blue", linewidth=0.6)
    for v0 in range(0, nv, grid_step):
        ax_grid.plot(hh + uh[:, v0], v0 + uv[:, v0],
                     color="tab:blue", linewidth=0.6)
    ax_grid.set_title(f"deformed grid ({axis}={slice_index})")
    ax_grid.set_aspect("equal")
    ax_grid.set_xlim(-1, nh)
    ax_grid.set_ylim(-1, nv)

    # panel (b): subsampled arrows, over the background slice if given
    if background is not None:
        bg = _slice_plane(background.data, axis, slice_index)
        ax_arrows.imshow(bg.T, cmap="gray", origin="lower",
                         interpolation="nearest")
    hs = np.arange(0, nh, arrow_stride)
    vs = np.arange(0, nv, arrow_stride)
    hg, vg = np.meshgrid(hs, vs, indexing="ij")
    ax_arrows.quiver(hg, vg, uh[hg, vg], uv[hg, vg], color="tab:red",
                     angles="xy", scale_units="xy", scale=1.0, width=0.004)
    ax_arrows.set_title("displacement arrows")
    ax_arrows.set_aspect("equal")
    ax_arrows.set_xlim(-1, nh)
    ax_arrows.set_ylim(-1, nv)
    return fig


def save_visualization(u: DispField, out_png, background=None, axis="z",
                       slice_index=None, arrow_stride=8, grid_step=4) -> None:
    fig = render_field(u, background, axis, slice_index, arrow_stride, grid_step)
    try:
        fig.savefig(out_png, dpi=100)
    finally:
        plt.close(fig)
