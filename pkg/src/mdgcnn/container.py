"""Versioned little-endian binary containers for precomputed pyramids and checkpoints.

Layout::

    magic     8 bytes   b"MDGCNN\\0\\0"
    version   uint32
    kind      uint32    1 = precompute, 2 = checkpoint
    hlen      uint64    length of the JSON header
    header    hlen bytes of UTF-8 JSON (sorted keys)
    payload   arrays back to back, each starting at a multiple of 8 bytes

The header lists every array as ``{"name", "dtype", "shape", "offset"}`` with
offsets relative to the payload start. All arrays are stored little-endian.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContainerError
from .gpc import GpcMap
from .mesh import TriangleMesh
from .pyramid import Pyramid
from .simplify import SimplificationMap
from .windows import WindowSpec, WindowTensors

MAGIC = b"MDGCNN\0\0"
VERSION = 1
KIND_PRECOMPUTE = 1
KIND_CHECKPOINT = 2
_PREFIX = struct.Struct("<8sIIQ")


def write_container(path, kind, header, arrays):
    """Write ``arrays`` (name -> ndarray) with a JSON ``header``; deterministic bytes."""
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        dt = a.dtype if a.dtype.itemsize == 1 else a.dtype.newbyteorder("<")
        data = np.ascontiguousarray(a, dtype=dt).tobytes()
        entries.append({"name": name, "dtype": dt.str, "shape": list(a.shape), "offset": offset})
        pad = (-len(data)) % 8
        blobs.append(data + b"\0" * pad)
        offset += len(data) + pad
    head = dict(header, arrays=entries)
    hbytes = json.dumps(head, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, kind, len(hbytes)))
        fh.write(hbytes)
        for b in blobs:
            fh.write(b)


def read_container(path, kind=None):
    """Return ``(kind, header, arrays)``; raises :class:`ContainerError` on bad files."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _PREFIX.size:
        raise ContainerError("file too short")
    magic, version, k, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError("bad magic, not a container")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if kind is not None and k != kind:
        raise ContainerError(f"container kind {k}, expected {kind}")
    start = _PREFIX.size + hlen
    try:
        header = json.loads(raw[_PREFIX.size:start].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError("corrupt header") from exc
    arrays = {}
    for e in header.pop("arrays"):
        dt = np.dtype(e["dtype"])
        n = int(np.prod(e["shape"], dtype=np.int64))
        lo = start + e["offset"]
        if lo + n * dt.itemsize > len(raw):
            raise ContainerError(f"array {e['name']} truncated")
        arrays[e["name"]] = np.frombuffer(raw, dtype=dt, count=n, offset=lo).reshape(e["shape"]).copy()
    return k, header, arrays


# -- pyramids ------------------------------------------------------------------

def save_pyramid(path, pyramid):
    spec = pyramid.spec
    arrays = {}
    for k in range(pyramid.n_levels):
        p = f"L{k}."
        m = pyramid.meshes[k]
        arrays[p + "positions"] = m.positions
        arrays[p + "faces"] = m.faces
        g = pyramid.gpcs[k]
        arrays[p + "gpc.ptr"] = np.concatenate([[0], np.cumsum([len(x.index) for x in g])]).astype(np.int64)
        for f in ("index", "r", "theta", "gamma", "on_boundary"):
            arrays[p + "gpc." + f] = np.concatenate([getattr(x, f) for x in g])
        t = pyramid.tensors[k]
        for f in ("E", "W", "gamma_floor", "gamma_frac", "valid"):
            arrays[p + "win." + f] = getattr(t, f)
    for k, smap in enumerate(pyramid.maps):
        p = f"M{k}."
        arrays[p + "fine_to_coarse"] = smap.fine_to_coarse
        arrays[p + "angle_offset"] = smap.angle_offset
        arrays[p + "representative"] = smap.representative
    header = {
        "mesh_hash": pyramid.meshes[0].content_hash(),
        "spec": {"n_rho": spec.n_rho, "n_theta": spec.n_theta, "radius": spec.radius},
        "r_max": list(pyramid.r_max),
        "eps": pyramid.eps,
        "levels": pyramid.n_levels - 1,
    }
    write_container(path, KIND_PRECOMPUTE, header, arrays)


def load_pyramid(path, mesh=None):
    """Load a precompute container; with ``mesh`` its content hash must match."""
    _, h, a = read_container(path, KIND_PRECOMPUTE)
    if mesh is not None and mesh.content_hash() != h["mesh_hash"]:
        raise ContainerError("container was computed for a different mesh")
    try:
        spec = WindowSpec(**h["spec"])
        meshes, gpcs, tensors, maps = [], [], [], []
        for k in range(h["levels"] + 1):
            p = f"L{k}."
            m = TriangleMesh(a[p + "positions"], a[p + "faces"])
            meshes.append(m)
            ptr = a[p + "gpc.ptr"]
            gpcs.append([GpcMap(s, m.n_vertices, h["r_max"][k],
                                *(a[p + "gpc." + f][ptr[s]:ptr[s + 1]]
                                  for f in ("index", "r", "theta", "gamma", "on_boundary")))
                         for s in range(m.n_vertices)])
            tensors.append(WindowTensors(spec.scaled(2.0 ** k),
                                         *(a[p + "win." + f] for f in ("E", "W", "gamma_floor", "gamma_frac", "valid"))))
        for k in range(h["levels"]):
            p = f"M{k}."
            maps.append(SimplificationMap(meshes[k], meshes[k + 1], a[p + "fine_to_coarse"],
                                          a[p + "angle_offset"], a[p + "representative"]))
    except KeyError as exc:
        raise ContainerError(f"container misses field {exc}") from exc
    if meshes[0].content_hash() != h["mesh_hash"]:
        raise ContainerError("stored mesh does not match its hash")
    return Pyramid(meshes, gpcs, tensors, maps, list(h["r_max"]), h["eps"]), h


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, params, config, mesh_hash, extra=None):
    header = {"config": config, "mesh_hash": mesh_hash}
    if extra:
        header["extra"] = extra
    write_container(path, KIND_CHECKPOINT, header, params)


def load_checkpoint(path):
    """Return ``(params, header)``."""
    _, h, a = read_container(path, KIND_CHECKPOINT)
    return a, h
