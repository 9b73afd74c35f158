"""Mesh file I/O: OBJ and binary little-endian PLY.

PLY carries per-vertex instance labels as an `int32 instance_id` property
and optionally a `float32 label_conf` vote-confidence property. OBJ stores
geometry only.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import BifieldError
from .mesh import TriMesh


class MeshIOError(BifieldError):
    pass


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------


def read_obj(path: str | os.PathLike) -> TriMesh:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not verts:
        raise MeshIOError(f"no vertices in OBJ file {path}")
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def write_obj(path: str | os.PathLike, mesh: TriMesh):
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# ---------------------------------------------------------------------------
# PLY (binary little-endian)
# ---------------------------------------------------------------------------

_PLY_DTYPES = {
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
    "char": "<i1", "int8": "<i1",
    "uchar": "<u1", "uint8": "<u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
}


def write_ply(path: str | os.PathLike, mesh: TriMesh, label_conf: np.ndarray | None = None):
    """Write a binary little-endian PLY; labels become `instance_id`."""
    has_labels = mesh.vertex_labels is not None
    fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if has_labels:
        fields.append(("instance_id", "<i4"))
        header.append("property int instance_id")
    if label_conf is not None:
        if len(label_conf) != mesh.n_vertices:
            raise MeshIOError("label_conf length must match vertex count")
        fields.append(("label_conf", "<f4"))
        header.append("property float label_conf")
    header += [
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    vdata = np.empty(mesh.n_vertices, dtype=fields)
    vdata["x"], vdata["y"], vdata["z"] = mesh.vertices.T
    if has_labels:
        vdata["instance_id"] = mesh.vertex_labels
    if label_conf is not None:
        vdata["label_conf"] = np.asarray(label_conf, dtype=np.float32)
    fdata = np.empty(mesh.n_faces, dtype=[("n", "<u1"), ("idx", "<i4", (3,))])
    fdata["n"] = 3
    fdata["idx"] = mesh.faces
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vdata.tobytes())
        fh.write(fdata.tobytes())


def read_ply(path: str | os.PathLike) -> tuple[TriMesh, np.ndarray | None]:
    """Read a binary little-endian PLY; returns (mesh, label_conf or None)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise MeshIOError(f"{path}: missing PLY end_header")
    header = blob[:end].decode("ascii").splitlines()
    body = blob[end + len(b"end_header\n"):]
    if header[0].strip() != "ply":
        raise MeshIOError(f"{path}: not a PLY file")

    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    fmt = None
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[-1], f"list:{parts[2]}:{parts[3]}"))
            else:
                elements[-1][2].append((parts[-1], parts[1]))
    if fmt != "binary_little_endian":
        raise MeshIOError(f"{path}: only binary_little_endian PLY is supported, got {fmt}")

    verts = labels = conf = faces = None
    offset = 0
    for name, count, props in elements:
        if name == "vertex":
            dt = np.dtype([(pname, _PLY_DTYPES[ptype]) for pname, ptype in props])
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += dt.itemsize * count
            verts = np.stack(
                [arr["x"].astype(np.float64), arr["y"].astype(np.float64), arr["z"].astype(np.float64)],
                axis=1,
            )
            if "instance_id" in dt.names:
                labels = arr["instance_id"].astype(np.int32)
            if "label_conf" in dt.names:
                conf = arr["label_conf"].astype(np.float64)
        elif name == "face":
            (pname, ptype), = props
            if not ptype.startswith("list"):
                raise MeshIOError(f"{path}: face element must hold an index list")
            _, count_t, idx_t = ptype.split(":")
            cdt, idt = _PLY_DTYPES[count_t], _PLY_DTYPES[idx_t]
            probe = np.frombuffer(body, dtype=cdt, count=1, offset=offset)
            if count and int(probe[0]) != 3:
                raise MeshIOError(f"{path}: only triangle faces are supported")
            dt = np.dtype([("n", cdt), ("idx", idt, (3,))])
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            if count and not np.all(arr["n"] == 3):
                raise MeshIOError(f"{path}: only triangle faces are supported")
            offset += dt.itemsize * count
            faces = arr["idx"].astype(np.int64)
        else:  # skip unknown fixed-size elements
            dt = np.dtype([(pname, _PLY_DTYPES[ptype]) for pname, ptype in props])
            offset += dt.itemsize * count
    if verts is None or faces is None:
        raise MeshIOError(f"{path}: PLY must contain vertex and face elements")
    return TriMesh(verts, faces, vertex_labels=labels), conf


def load_mesh(path: str | os.PathLike) -> TriMesh:
    """Load an OBJ or PLY mesh by extension."""
    s = str(path)
    if s.lower().endswith(".obj"):
        return read_obj(path)
    if s.lower().endswith(".ply"):
        return read_ply(path)[0]
    raise MeshIOError(f"unsupported mesh format: {path}")


def save_mesh(path: str | os.PathLike, mesh: TriMesh, label_conf=None):
    s = str(path)
    if s.lower().endswith(".obj"):
        write_obj(path, mesh)
    elif s.lower().endswith(".ply"):
        write_ply(path, mesh, label_conf=label_conf)
    else:
        raise MeshIOError(f"unsupported mesh format: {path}")
