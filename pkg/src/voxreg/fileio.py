"""File I/O: a minimal NIfTI-1 codec plus landmark CSV.

Only the subset this toolkit needs: single-file .nii / .nii.gz, 3D
scalar volumes and 4D 3-component displacement fields, datatypes
uint8/int16/int32/float32/float64, diagonal affines.  Data on disk is
x-fastest as the format dictates; in memory we index [x, y, z].
"""

import csv
import gzip
import os
import struct
import warnings

import numpy as np

from .field import DispField
from .volume import LabelMap, LandmarkSet, Volume3

# NIfTI-1 datatype codes
_DTYPES = {2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32, 64: np.float64}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}

_HDR_SIZE = 348
_VOX_OFFSET = 352.0


class NiftiError(ValueError):
    """Malformed or unsupported NIfTI content."""


class _GzWriter(gzip.GzipFile):
    """Gzip writer with mtime=0 and an empty FNAME field, so the bytes
    on disk depend only on the payload, not on the clock or the
    destination path."""

    def __init__(self, path):
        self._raw = open(path, "wb")
        super().__init__("", "wb", fileobj=self._raw, mtime=0)

    def close(self):
        try:
            super().close()
        finally:
            self._raw.close()


def _open_maybe_gz(path, mode):
    if str(path).endswith(".gz"):
        if "w" in mode:
            return _GzWriter(path)
        return gzip.open(path, mode)
    return open(path, mode)


def _read_header(raw):
    if len(raw) < _HDR_SIZE:
        raise NiftiError(f"truncated header ({len(raw)} bytes)")
    for bo in ("<", ">"):
        (sizeof_hdr,) = struct.unpack(bo + "i", raw[:4])
        if sizeof_hdr == _HDR_SIZE:
            break
    else:
        raise NiftiError("not a NIfTI-1 file (sizeof_hdr != 348)")
    dim = struct.unpack(bo + "8h", raw[40:56])
    datatype, bitpix = struct.unpack(bo + "2h", raw[70:74])
    pixdim = struct.unpack(bo + "8f", raw[76:108])
    (vox_offset,) = struct.unpack(bo + "f", raw[108:112])
    scl_slope, scl_inter = struct.unpack(bo + "2f", raw[112:120])
    qform_code, sform_code = struct.unpack(bo + "2h", raw[252:256])
    quatern = struct.unpack(bo + "6f", raw[256:280])
    srow = np.array(struct.unpack(bo + "12f", raw[280:328])).reshape(3, 4)
    magic = raw[344:348]
    if magic[:3] not in (b"n+1", b"ni1"):
        raise NiftiError(f"bad magic {magic!r}")
    return {
        "bo": bo, "dim": dim, "datatype": datatype, "bitpix": bitpix,
        "pixdim": pixdim, "vox_offset": vox_offset,
        "scl_slope": scl_slope, "scl_inter": scl_inter,
        "qform_code": qform_code, "sform_code": sform_code,
        "qoffset": quatern[3:], "srow": srow,
    }


def _read_raw(path):
    with _open_maybe_gz(path, "rb") as f:
        blob = f.read()
    hdr = _read_header(blob)
    ndim = hdr["dim"][0]
    if not 3 <= ndim <= 5:
        raise NiftiError(f"unsupported dimensionality {ndim}")
    shape = [max(1, hdr["dim"][i]) for i in range(1, ndim + 1)]
    # tolerate trailing singleton dims (e.g. 5D vector storage)
    while len(shape) > 3 and shape[-1] == 1:
        shape.pop()
    if hdr["datatype"] not in _DTYPES:
        raise NiftiError(f"unsupported datatype code {hdr['datatype']}")
    dt = np.dtype(_DTYPES[hdr["datatype"]]).newbyteorder(hdr["bo"])
    n = int(np.prod(shape))
    off = int(hdr["vox_offset"])
    data = np.frombuffer(blob, dtype=dt, count=n, offset=off)
    data = data.reshape(shape, order="F")  # disk layout is x fastest
    data = np.ascontiguousarray(data.astype(data.dtype.newbyteorder("=")))

    spacing = tuple(abs(float(hdr["pixdim"][i])) or 1.0 for i in (1, 2, 3))
    if hdr["sform_code"] > 0:
        rot = hdr["srow"][:, :3]
        off_diag = rot - np.diag(np.diag(rot))
        if np.max(np.abs(off_diag)) > 1e-6 * max(1.0, np.max(np.abs(rot))):
            warnings.warn(f"{path}: non-diagonal affine; keeping spacing+origin only",
                          stacklevel=3)
        origin = tuple(float(v) for v in hdr["srow"][:, 3])
    elif hdr["qform_code"] > 0:
        origin = tuple(float(v) for v in hdr["qoffset"])
    else:
        origin = (0.0, 0.0, 0.0)

    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope not in (0.0, 1.0) or inter != 0.0:
        data = data.astype(np.float64) * (slope if slope != 0.0 else 1.0) + inter
    return data, spacing, origin


def load_nifti(path, kind="auto"):
    """Load a 3D scalar NIfTI as a Volume3 or LabelMap.

    kind: "auto" maps integer datatypes to LabelMap and floats to
    Volume3; force with "image" or "labels".  4D files are fields —
    use load_field.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    data, spacing, origin = _read_raw(path)
    if data.ndim != 3:
        raise NiftiError(f"{path}: expected a 3D scalar volume, got shape "
                         f"{data.shape}; displacement fields load via load_field")
    if kind not in ("auto", "image", "labels"):
        raise ValueError(f"kind must be auto|image|labels, got {kind!r}")
    want_labels = (kind == "labels") or (
        kind == "auto" and np.issubdtype(data.dtype, np.integer))
    if want_labels:
        ints = np.rint(data).astype(np.int32)
        if not np.allclose(data, ints, rtol=0.0, atol=1e-6):
            raise NiftiError(f"{path}: non-integer values in a label volume")
        return LabelMap(ints, spacing, origin)
    if not np.all(np.isfinite(data)):
        raise NiftiError(f"{path}: non-finite voxel values")
    return Volume3(data.astype(np.float32), spacing, origin)


def load_field(path) -> DispField:
    """Load a displacement field stored as a (nx,ny,nz,3) float NIfTI."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    data, spacing, origin = _read_raw(path)
    if data.ndim != 4 or data.shape[3] != 3:
        raise NiftiError(f"{path}: expected shape (nx,ny,nz,3), got {data.shape}")
    return DispField(data.astype(np.float32), spacing, origin)


def _write_header(f, shape, code, spacing, origin):
    hdr = bytearray(_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    dim = [len(shape)] + list(shape) + [1] * (7 - len(shape))
    struct.pack_into("<8h", hdr, 40, *dim)
    struct.pack_into("<2h", hdr, 70, code, _BITPIX[code])
    pixdim = [1.0] + list(spacing) + [1.0] * (7 - len(spacing))
    struct.pack_into("<8f", hdr, 76, *pixdim)
    struct.pack_into("<f", hdr, 108, _VOX_OFFSET)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform on
    sx, sy, sz = spacing
    ox, oy, oz = origin
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, ox)
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, oy)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, oz)
    hdr[344:348] = b"n+1\x00"
    f.write(bytes(hdr))
    f.write(b"\x00" * 4)  # no header extensions


def _save(path, array, code, spacing, origin):
    arr = np.asarray(array, dtype=_DTYPES[code])
    with _open_maybe_gz(path, "wb") as f:
        _write_header(f, arr.shape, code, spacing, origin)
        f.write(arr.tobytes(order="F"))


def save_nifti(vol, path) -> None:
    """Write a Volume3 (float32) or LabelMap (int16, int32 if needed) to disk."""
    if isinstance(vol, Volume3):
        _save(path, vol.data, _CODES[np.dtype(np.float32)], vol.spacing, vol.origin)
    elif isinstance(vol, LabelMap):
        code = _CODES[np.dtype(np.int16)]
        if vol.label_set and vol.label_set[-1] > np.iinfo(np.int16).max:
            code = _CODES[np.dtype(np.int32)]
        _save(path, vol.data, code, vol.spacing, vol.origin)
    else:
        raise TypeError(f"save_nifti expects Volume3 or LabelMap, got {type(vol)}")


def save_field(u: DispField, path) -> None:
    """Write a displacement field as a (nx,ny,nz,3) float32 NIfTI."""
    _save(path, u.data, _CODES[np.dtype(np.float32)], u.spacing, u.origin)


def load_landmarks(path) -> LandmarkSet:
    """Read landmarks from CSV with header x,y,z (world mm)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or [c.strip().lower() for c in rows[0]] != ["x", "y", "z"]:
        raise ValueError(f"{path}: expected CSV header 'x,y,z'")
    pts = np.array([[float(c) for c in row] for row in rows[1:] if row],
                   dtype=np.float64).reshape(-1, 3)
    return LandmarkSet(pts)


def save_landmarks(pts: LandmarkSet, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "z"])
        for p in pts.points:
            w.writerow([repr(float(v)) for v in p])
