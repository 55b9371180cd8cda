"""Point cloud container, PLY reading/writing and unit-cube normalization."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class PlyError(ValueError):
    """Raised for unreadable or unsupported PLY content."""


class DegenerateCloudError(ValueError):
    """Raised when a cloud has zero extent on every axis."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3-D positions with optional per-point unit normals.

    Arrays are stored as read-only float64 ``(N, 3)`` arrays.
    """

    points: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", _frozen(pts))
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if nrm.shape != pts.shape:
                raise ValueError(
                    f"normals shape {nrm.shape} does not match points {pts.shape}"
                )
            object.__setattr__(self, "normals", _frozen(nrm))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_normals(self) -> bool:
        return self.normals is not None


@dataclass(frozen=True)
class NormTransform:
    """Uniform map from original units to the unit cube: ``(x - offset) / scale``."""

    offset: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "offset", _frozen(np.asarray(self.offset).reshape(3)))
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))

    def forward(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.offset) / self.scale

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.offset


def renormalize_normals(normals: np.ndarray) -> np.ndarray:
    """Scale normals to unit length; zero-length ones become ``(0, 0, 1)``."""
    normals = np.array(normals, dtype=np.float64).reshape(-1, 3)
    lengths = np.linalg.norm(normals, axis=1)
    zero = lengths == 0.0
    if zero.any():
        log.warning("%d zero-length normals replaced by (0, 0, 1)", int(zero.sum()))
        normals[zero] = (0.0, 0.0, 1.0)
        lengths[zero] = 1.0
    return normals / lengths[:, None]


# --------------------------------------------------------------------------- PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class _Element:
    name: str
    count: int
    props: list  # (name, dtype) pairs; list properties carry dtype None
    list_types: dict


def _parse_header(f):
    first = f.readline()
    if first.strip() != b"ply":
        raise PlyError("missing 'ply' magic line")
    fmt = None
    elements: list[_Element] = []
    while True:
        raw = f.readline()
        if not raw:
            raise PlyError("unexpected end of file inside header")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise PlyError("non-ASCII bytes in header") from exc
        if not line or line.startswith(("comment", "obj_info")):
            continue
        words = line.split()
        if words[0] == "end_header":
            break
        if words[0] == "format":
            if len(words) != 3:
                raise PlyError(f"malformed format line: {line!r}")
            fmt = words[1]
            if fmt == "binary_big_endian":
                raise PlyError("big-endian binary PLY is not supported")
            if fmt not in ("ascii", "binary_little_endian"):
                raise PlyError(f"unknown PLY format {fmt!r}")
        elif words[0] == "element":
            if len(words) != 3:
                raise PlyError(f"malformed element line: {line!r}")
            try:
                count = int(words[2])
            except ValueError as exc:
                raise PlyError(f"bad element count in {line!r}") from exc
            if count < 0:
                raise PlyError(f"negative element count in {line!r}")
            elements.append(_Element(words[1], count, [], {}))
        elif words[0] == "property":
            if not elements:
                raise PlyError("property declared before any element")
            el = elements[-1]
            if len(words) == 5 and words[1] == "list":
                if words[2] not in _PLY_TYPES or words[3] not in _PLY_TYPES:
                    raise PlyError(f"unknown list property types in {line!r}")
                el.props.append((words[4], None))
                el.list_types[words[4]] = (_PLY_TYPES[words[2]], _PLY_TYPES[words[3]])
            elif len(words) == 3:
                if words[1] not in _PLY_TYPES:
                    raise PlyError(f"unknown property type {words[1]!r}")
                el.props.append((words[2], _PLY_TYPES[words[1]]))
            else:
                raise PlyError(f"malformed property line: {line!r}")
        else:
            raise PlyError(f"unexpected header line: {line!r}")
    if fmt is None:
        raise PlyError("header has no format line")
    return fmt, elements


def _skip_binary_element(f, el: _Element):
    if not el.list_types:
        dtype = np.dtype([(n, "<" + t) for n, t in el.props])
        f.seek(el.count * dtype.itemsize, os.SEEK_CUR)
        return
    for _ in range(el.count):
        for name, t in el.props:
            if t is None:
                count_t, item_t = el.list_types[name]
                n = int(np.frombuffer(f.read(np.dtype(count_t).itemsize), "<" + count_t)[0])
                f.seek(n * np.dtype(item_t).itemsize, os.SEEK_CUR)
            else:
                f.seek(np.dtype(t).itemsize, os.SEEK_CUR)


def read_ply(path) -> PointCloud:
    """Read the vertex positions (and ``nx, ny, nz`` if present) of a PLY file.

    Supports ASCII and binary little-endian files. Properties other than
    positions and normals are ignored; normals are renormalized to unit length.
    """
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f)
        vertex = next((e for e in elements if e.name == "vertex"), None)
        if vertex is None:
            raise PlyError("no vertex element")
        names = [n for n, _ in vertex.props]
        for axis in "xyz":
            if axis not in names:
                raise PlyError(f"vertex element lacks property {axis!r}")
        if vertex.list_types:
            raise PlyError("list properties on vertex element are not supported")

        if fmt == "ascii":
            # elements before 'vertex' are skipped line by line
            for el in elements:
                if el is vertex:
                    break
                for _ in range(el.count):
                    f.readline()
            rows = []
            for i in range(vertex.count):
                line = f.readline()
                if not line:
                    raise PlyError(
                        f"vertex count mismatch: header says {vertex.count}, file has {i}"
                    )
                vals = line.split()
                if len(vals) != len(vertex.props):
                    raise PlyError(f"vertex {i}: expected {len(vertex.props)} values")
                rows.append(vals)
            try:
                data = np.array(rows, dtype=np.float64).reshape(vertex.count, len(names))
            except ValueError as exc:
                raise PlyError("non-numeric vertex data") from exc
            columns = {n: data[:, i] for i, n in enumerate(names)}
            if vertex is elements[-1] and f.read().strip():
                raise PlyError(f"vertex count mismatch: more than {vertex.count} rows")
        else:
            for el in elements:
                if el is vertex:
                    break
                _skip_binary_element(f, el)
            dtype = np.dtype([(n, "<" + t) for n, t in vertex.props])
            payload = f.read(dtype.itemsize * vertex.count)
            if len(payload) != dtype.itemsize * vertex.count:
                raise PlyError(
                    f"vertex count mismatch: header says {vertex.count}, "
                    f"payload holds {len(payload) // dtype.itemsize}"
                )
            rec = np.frombuffer(payload, dtype=dtype)
            columns = {n: rec[n].astype(np.float64) for n in names}
            if vertex is elements[-1] and f.read(1):
                raise PlyError(f"vertex count mismatch: trailing data after {vertex.count} rows")

    if vertex.count == 0:
        raise PlyError("point cloud is empty")
    points = np.column_stack([columns["x"], columns["y"], columns["z"]])
    normals = None
    if all(n in columns for n in ("nx", "ny", "nz")):
        normals = renormalize_normals(
            np.column_stack([columns["nx"], columns["ny"], columns["nz"]])
        )
    return PointCloud(points, normals)


def write_ply(cloud: PointCloud, path, format: str = "binary-le", precision: int = 64) -> None:
    """Write ``cloud`` as PLY.

    ``format`` is ``"ascii"`` or ``"binary-le"``; ``precision`` is 32 or 64 bits.
    """
    if len(cloud) == 0:
        raise ValueError("cannot write an empty point cloud")
    if format not in ("ascii", "binary-le"):
        raise ValueError(f"unknown PLY format {format!r}")
    if precision not in (32, 64):
        raise ValueError(f"precision must be 32 or 64, got {precision}")
    ptype, np_t = ("double", "<f8") if precision == 64 else ("float", "<f4")
    names = ["x", "y", "z"]
    cols = [cloud.points]
    if cloud.normals is not None:
        names += ["nx", "ny", "nz"]
        cols.append(cloud.normals)
    data = np.hstack(cols)

    header = ["ply", "format " + ("ascii 1.0" if format == "ascii" else "binary_little_endian 1.0"),
              f"element vertex {len(cloud)}"]
    header += [f"property {ptype} {n}" for n in names]
    header.append("end_header")

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if format == "ascii":
            if precision == 64:
                lines = (" ".join(repr(float(v)) for v in row) for row in data)
            else:
                lines = (" ".join(repr(float(v)) for v in row.astype(np.float32)) for row in data)
            f.write(("\n".join(lines) + "\n").encode("ascii"))
        else:
            f.write(np.ascontiguousarray(data, dtype=np_t).tobytes())


# ------------------------------------------------------------------ normalization


def normalize_unit_cube(cloud: PointCloud) -> tuple[PointCloud, NormTransform]:
    """Map the cloud into ``[0, 1]^3`` by a shift to the origin and one uniform scale."""
    if len(cloud) == 0:
        raise ValueError("cannot normalize an empty point cloud")
    lo = cloud.points.min(axis=0)
    extent = float((cloud.points.max(axis=0) - lo).max())
    if extent == 0.0:
        raise DegenerateCloudError("all points are identical; cloud has zero extent")
    t = NormTransform(lo, extent)
    out = np.clip(t.forward(cloud.points), 0.0, 1.0)
    return PointCloud(out, cloud.normals), t


def denormalize(cloud: PointCloud, t: NormTransform) -> PointCloud:
    return PointCloud(t.inverse(cloud.points), cloud.normals)

