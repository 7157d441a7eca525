"""Synthetic labeled phantoms and smooth random fields for the test harness."""

import numpy as np
from scipy.ndimage import gaussian_filter

from .field import DispField
from .volume import LabelMap, LandmarkSet, Volume3


def _place_structures(rng, dims, count, r_lo, r_hi):
    """Draw non-overlapping (center, radius) pairs by rejection sampling."""
    dims = np.asarray(dims, dtype=np.float64)
    placed = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > 200 * count:
            raise ValueError(
                f"dims {tuple(int(d) for d in dims)} too small for "
                f"{count} structures")
        r = rng.uniform(r_lo, r_hi)
        margin = r + 2.0
        if np.any(dims - 1 < 2 * margin):
            raise ValueError(
                f"dims {tuple(int(d) for d in dims)} too small for "
                f"{count} structures")
        c = np.array([rng.uniform(margin, d - 1 - margin) for d in dims])
        if all(np.linalg.norm(c - c2) >= r + r2 + 2.0 for c2, r2 in placed):
            placed.append((c, r))
    return placed


def make_phantom(kind: str, dims, seed: int, count: int = 5,
                 spacing=(1.0, 1.0, 1.0), texture_sigma: float = 3.0):
    """Deterministic labeled test volume with centroid landmarks.

    kind "spheres" drops shaded balls, "blobs" random ellipsoids, both
    on a smooth noise background so windowed NCC has texture to grip
    everywhere.  texture_sigma sets the background feature scale in
    voxels: small values make fine texture that only matches locally —
    the regime where coarse-to-fine search earns its keep.  Labels
    1..count mark the structures; landmarks are the label centroids in
    world mm.
    """
    if kind not in ("spheres", "blobs"):
        raise ValueError(f"kind must be 'spheres' or 'blobs', got {kind!r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    dims = tuple(int(d) for d in dims)
    rng = np.random.default_rng(seed)

    r_scale = min(dims) / 64.0
    structures = _place_structures(rng, dims, count,
                                   r_lo=5.0 * r_scale, r_hi=8.0 * r_scale)

    img = gaussian_filter(rng.standard_normal(dims), sigma=texture_sigma)
    img = 0.3 * (img - img.min()) / max(img.max() - img.min(), 1e-12)
    lab = np.zeros(dims, dtype=np.int32)

    x = np.arange(dims[0], dtype=np.float64)[:, None, None]
    y = np.arange(dims[1], dtype=np.float64)[None, :, None]
    z = np.arange(dims[2], dtype=np.float64)[None, None, :]
    for i, (c, r) in enumerate(structures):
        if kind == "spheres":
            q = ((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / r ** 2
        else:
            # random ellipsoid: rotate a diagonal quadratic form
            axes = rng.uniform(0.6, 1.0, size=3) * r
            m = rng.standard_normal((3, 3))
            qmat, _ = np.linalg.qr(m)
            quad = qmat @ np.diag(1.0 / axes ** 2) @ qmat.T
            dx, dy, dz = x - c[0], y - c[1], z - c[2]
            q = (quad[0, 0] * dx * dx + quad[1, 1] * dy * dy
                 + quad[2, 2] * dz * dz + 2 * quad[0, 1] * dx * dy
                 + 2 * quad[0, 2] * dx * dz + 2 * quad[1, 2] * dy * dz)
        inside = q <= 1.0
        lab[inside] = i + 1
        bump = rng.uniform(0.5, 1.0)
        img += bump * np.maximum(0.0, 1.0 - q)

    volume = Volume3(img.astype(np.float32), spacing)
    labels = LabelMap(lab, spacing)
    landmarks = label_centroids(labels)
    return volume, labels, landmarks


def label_centroids(lab: LabelMap) -> LandmarkSet:
    """World-mm centroid of every non-zero label, in label order."""
    pts = []
    sp = np.asarray(lab.spacing)
    org = np.asarray(lab.origin)
    for lb in lab.label_set:
        if lb == 0:
            continue
        idx = np.argwhere(lab.data == lb)
        pts.append(idx.mean(axis=0) * sp + org)
    return LandmarkSet(np.array(pts, dtype=np.float64).reshape(-1, 3))


def bump_field(dims, centers, max_disp: float, seed: int,
               sigma: float | None = None,
               spacing=(1.0, 1.0, 1.0)) -> DispField:
    """Smooth field of Gaussian displacement bumps at given voxel centers.

    Each center gets a random direction; magnitudes are rescaled so the
    peak vector norm equals max_disp.  Centering bumps on a phantom's
    structures guarantees the structures actually move, which a
    peak-normalized random field does not.
    """
    dims = tuple(int(d) for d in dims)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if sigma is None:
        sigma = min(dims) / 7.0
    rng = np.random.default_rng(seed)
    x = np.arange(dims[0], dtype=np.float64)[:, None, None]
    y = np.arange(dims[1], dtype=np.float64)[None, :, None]
    z = np.arange(dims[2], dtype=np.float64)[None, None, :]
    out = np.zeros(dims + (3,), dtype=np.float64)
    for c in centers:
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        direction *= rng.uniform(0.6, 1.0)
        d2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        out += np.exp(-d2 / (2.0 * sigma ** 2))[..., None] * direction
    mag = np.sqrt((out ** 2).sum(axis=-1))
    peak = float(mag.max())
    if peak > 0:
        out *= max_disp / peak
    return DispField(out.astype(np.float32), spacing)


def smooth_random_field(dims, max_disp: float, seed: int,
                        sigma: float | None = None,
                        spacing=(1.0, 1.0, 1.0)) -> DispField:
    """Smooth random displacement field scaled to a peak vector norm.

    Gaussian-filtered white noise per component; sigma defaults to an
    eighth of the largest dimension, large enough that fields of a few
    voxels stay fold-free.
    """
    dims = tuple(int(d) for d in dims)
    if sigma is None:
        sigma = max(dims) / 8.0
    rng = np.random.default_rng(seed)
    comps = np.stack(
        [gaussian_filter(rng.standard_normal(dims), sigma=sigma)
         for _ in range(3)], axis=-1)
    mag = np.sqrt((comps ** 2).sum(axis=-1))
    peak = float(mag.max())
    if peak > 0:
        comps *= max_disp / peak
    return DispField(comps.astype(np.float32), spacing)
