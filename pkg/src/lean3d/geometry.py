"""Point loading, uniform lattice quantization, and inverse quantization.

Quantization floors each coordinate by the step ``q`` (codec parameter
``posQ``); the resulting deduplicated voxel set is the codec's lossless
target. Dequantization reconstructs the voxel lower corner ``x * q`` so
that quantize(dequantize(V, q), q) == V exactly; center reconstruction
is available behind a flag for distortion experiments.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, ParameterError

KITTI_RECORD = struct.Struct("<ffff")


def canonical_argsort(coords: np.ndarray) -> np.ndarray:
    """Permutation sorting integer 3-vectors lexicographically by
    (z, y, x) ascending.

    When the per-axis spans fit a single 63-bit packed key, one int64
    argsort replaces the 3-key lexsort (same order, much faster).
    """
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    if len(coords) > 1:
        bx = int(x.max() - x.min()).bit_length()
        by = int(y.max() - y.min()).bit_length()
        bz = int(z.max() - z.min()).bit_length()
        if bx + by + bz <= 63:
            key = (
                ((z - z.min()) << (bx + by))
                | ((y - y.min()) << bx)
                | (x - x.min())
            )
            return np.argsort(key)
    return np.lexsort((x, y, z))


def canonical_sort(coords: np.ndarray) -> np.ndarray:
    """Sort integer 3-vectors lexicographically by (z, y, x) ascending."""
    coords = np.asarray(coords)
    return coords[canonical_argsort(coords)]


def canonical_unique(coords: np.ndarray):
    """Canonically sorted unique rows plus the inverse index per input row."""
    coords = np.asarray(coords)
    order = canonical_argsort(coords)
    s = coords[order]
    if len(s) == 0:
        return s, np.empty(0, dtype=np.int64)
    new = np.empty(len(s), dtype=bool)
    new[0] = True
    np.any(s[1:] != s[:-1], axis=1, out=new[1:])
    uniq = s[new]
    group = np.cumsum(new) - 1
    inverse = np.empty(len(s), dtype=np.int64)
    inverse[order] = group
    return uniq, inverse


@dataclass(frozen=True)
class QuantizedCloud:
    """Deduplicated integer lattice coordinates plus the step used."""

    voxels: np.ndarray  # (N, 3) int64, canonically sorted, unique
    q: float

    def __len__(self):
        return len(self.voxels)


def quantize(points, q) -> QuantizedCloud:
    """Floor-quantize points by step q and deduplicate.

    Negative coordinates round toward -inf. Duplicate points collapsing
    onto one voxel are merged silently.
    """
    if not q > 0:
        raise ParameterError(f"quantization step must be positive, got {q}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise InputError("point cloud contains NaN or Inf coordinates")
    vox = np.floor(pts / q).astype(np.int64)
    uniq, _ = canonical_unique(vox)
    return QuantizedCloud(uniq, float(q))


def dequantize(voxels, q, center: bool = False) -> np.ndarray:
    """Map lattice coordinates back to dataset units.

    Lower-corner reconstruction by default; ``center=True`` adds q/2.
    """
    if not q > 0:
        raise ParameterError(f"quantization step must be positive, got {q}")
    vox = np.asarray(voxels, dtype=np.float64).reshape(-1, 3)
    pts = vox * q
    if center:
        pts += 0.5 * q
    return pts


def _load_kitti_bin(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) % 16 != 0:
        raise FormatError(
            f"{path}: truncated kitti-bin record at offset {len(data) - len(data) % 16}",
            offset=len(data) - len(data) % 16,
        )
    if not data:
        return np.empty((0, 3), dtype=np.float64)
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    return arr[:, :3].astype(np.float64)


def _load_ply_ascii(path: Path) -> np.ndarray:
    with path.open("r", errors="replace") as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise FormatError(f"{path}: missing ply signature")
        n_vertex = None
        props = []
        in_vertex = False
        while True:
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: unterminated ply header")
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "element":
                in_vertex = tokens[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tokens[2])
            elif tokens[0] == "property" and in_vertex:
                props.append(tokens[-1])
            elif tokens[0] == "end_header":
                break
        if n_vertex is None:
            raise FormatError(f"{path}: ply file has no vertex element")
        try:
            cols = [props.index(axis) for axis in ("x", "y", "z")]
        except ValueError as exc:
            raise FormatError(f"{path}: vertex element lacks x/y/z properties") from exc
        pts = np.empty((n_vertex, 3), dtype=np.float64)
        for i in range(n_vertex):
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: expected {n_vertex} vertices, got {i}")
            vals = line.split()
            try:
                for j, c in enumerate(cols):
                    pts[i, j] = float(vals[c])
            except (IndexError, ValueError) as exc:
                raise FormatError(f"{path}: malformed vertex line {i}") from exc
        return pts


_FORMATS = {"kitti-bin": _load_kitti_bin, "ply-ascii": _load_ply_ascii}
_EXTENSIONS = {".bin": "kitti-bin", ".ply": "ply-ascii"}


def detect_format(path) -> str:
    fmt = _EXTENSIONS.get(Path(path).suffix.lower())
    if fmt is None:
        raise ParameterError(f"cannot infer point format from {path!r}; use .bin or .ply")
    return fmt


def load_points(path, format: str | None = None) -> np.ndarray:
    """Load a point cloud as an (N, 3) float array.

    kitti-bin: packed little-endian float32 x,y,z,intensity records
    (intensity discarded). ply-ascii: minimal vertex x/y/z subset.
    """
    path = Path(path)
    fmt = format or detect_format(path)
    try:
        loader = _FORMATS[fmt]
    except KeyError:
        raise ParameterError(f"unknown point format {fmt!r}") from None
    return loader(path)


def save_points(path, points, format: str | None = None) -> None:
    """Write points in kitti-bin or ply-ascii form (chosen by extension)."""
    path = Path(path)
    fmt = format or detect_format(path)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if fmt == "kitti-bin":
        rec = np.zeros((len(pts), 4), dtype="<f4")
        rec[:, :3] = pts
        path.write_bytes(rec.tobytes())
    elif fmt == "ply-ascii":
        with path.open("w") as fh:
            fh.write("ply\nformat ascii 1.0\n")
            fh.write(f"element vertex {len(pts)}\n")
            fh.write("property float x\nproperty float y\nproperty float z\n")
            fh.write("end_header\n")
            for x, y, z in pts:
                fh.write(f"{x:.8g} {y:.8g} {z:.8g}\n")
    else:
        raise ParameterError(f"unknown point format {fmt!r}")
