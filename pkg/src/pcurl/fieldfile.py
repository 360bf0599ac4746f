"""Binary field container ("PCRL" format).

Layout, all little-endian:

  magic   4 bytes  b"PCRL"
  version 1 byte   1 = box field, 2 = meridian field (adds a class byte)
  dims    3 x u32  nodes per axis
  length  3 x f64  box edge lengths
  p       1 x f64  exponent the field was produced with
  ncomp   1 x u8   number of components (1 or 3; meridian: 1, 2 or 3)
  [class] 1 x u8   only version 2: ASCII T, S or O
  payload ncomp blocks of f64, x-fastest row-major

Radial profiles reuse version 1 with dims (n, 1, 1); the second length
slot then stores the innermost radius of the log-spaced grid (the first
stores the outermost), as noted in :mod:`pcurl.plap`.
"""

from __future__ import annotations

import struct

import numpy as np

from .fields import GridSpec, ScalarField, VectorField3

MAGIC = b"PCRL"
VERSION_FIELD = 1
VERSION_MERIDIAN = 2

_HEAD = struct.Struct("<3I3dd B")


class FieldFormatError(ValueError):
    """Malformed or unsupported PCRL content."""


def write_raw(path, version: int, dims, lengths, p: float, comps,
              class_byte: bytes | None = None):
    """Low-level writer; ``comps`` is a sequence of equal-shape arrays."""
    dims = tuple(int(d) for d in dims)
    comps = [np.ascontiguousarray(c, dtype=np.float64) for c in comps]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([version]))
        fh.write(_HEAD.pack(*dims, *[float(v) for v in lengths], float(p),
                            len(comps)))
        if version == VERSION_MERIDIAN:
            if class_byte is None or len(class_byte) != 1:
                raise FieldFormatError("meridian files need a class byte")
            fh.write(class_byte)
        for c in comps:
            if c.size != dims[0] * dims[1] * dims[2]:
                raise FieldFormatError("component size does not match dims")
            # x-fastest on disk: first index varies fastest
            fh.write(c.reshape(dims).ravel(order="F").tobytes())


def read_raw(path) -> dict:
    """Low-level reader returning a dict of header fields and components."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FieldFormatError(f"{path}: bad magic")
        version = fh.read(1)[0]
        if version not in (VERSION_FIELD, VERSION_MERIDIAN):
            raise FieldFormatError(f"{path}: unsupported version {version}")
        head = fh.read(_HEAD.size)
        if len(head) != _HEAD.size:
            raise FieldFormatError(f"{path}: truncated header")
        n1, n2, n3, L1, L2, L3, p, ncomp = _HEAD.unpack(head)
        class_byte = fh.read(1) if version == VERSION_MERIDIAN else None
        count = n1 * n2 * n3
        comps = []
        for _ in range(ncomp):
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise FieldFormatError(f"{path}: truncated payload")
            flat = np.frombuffer(buf, dtype="<f8")
            comps.append(flat.reshape((n1, n2, n3), order="F"))
        if fh.read(1):
            raise FieldFormatError(f"{path}: trailing bytes")
    return {
        "version": version,
        "dims": (n1, n2, n3),
        "lengths": (L1, L2, L3),
        "p": p,
        "class": class_byte,
        "comps": comps,
    }


def save_field(path, f, p: float):
    """Write a ScalarField or VectorField3 as a version-1 file."""
    if isinstance(f, VectorField3):
        comps = [f.data[i] for i in range(3)]
    elif isinstance(f, ScalarField):
        comps = [f.data]
    else:
        raise TypeError(f"cannot save {type(f)!r}")
    write_raw(path, VERSION_FIELD, f.spec.n, f.spec.box, p, comps)


def load_field(path):
    """Read a version-1 file; returns ``(field, p)``."""
    raw = read_raw(path)
    if raw["version"] != VERSION_FIELD:
        raise FieldFormatError(f"{path}: not a box field file")
    spec = GridSpec(raw["dims"], raw["lengths"])
    if len(raw["comps"]) == 1:
        return ScalarField(spec, raw["comps"][0]), raw["p"]
    if len(raw["comps"]) == 3:
        return VectorField3(spec, np.stack(raw["comps"])), raw["p"]
    raise FieldFormatError(f"{path}: box fields carry 1 or 3 components")
