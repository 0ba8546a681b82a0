"""GVF1 tensor files.

Layout (little-endian): magic ``b"GVF1"``, u8 version (1), u8 dtype (0 = f32),
u16 reserved (0), u32 height, u32 width, u32 channels, then
``height * width * channels`` float32 values, row-major, channel-last.
"""
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"GVF1"
HEADER = struct.Struct("<4sBBHIII")


def encode(tensor):
    t = np.asarray(tensor, dtype="<f4")
    if t.ndim == 2:
        t = t[..., None]
    if t.ndim != 3:
        raise DataError(f"cannot encode tensor of shape {t.shape}")
    h, w, c = t.shape
    return HEADER.pack(MAGIC, 1, 0, 0, h, w, c) + np.ascontiguousarray(t).tobytes()


def decode(data, source="<bytes>"):
    if len(data) < HEADER.size:
        raise DataError(f"{source}: truncated GVF1 header")
    magic, version, dtype, _, h, w, c = HEADER.unpack_from(data)
    if magic != MAGIC or version != 1 or dtype != 0:
        raise DataError(f"{source}: not a GVF1 v1 float32 file")
    expected = HEADER.size + 4 * h * w * c
    if len(data) != expected:
        raise DataError(f"{source}: feature shape mismatch (header {h}x{w}x{c}, {len(data)} bytes)")
    arr = np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(h, w, c)
    return arr.astype(np.float32)


def write(path, tensor):
    Path(path).write_bytes(encode(tensor))


def read(path):
    path = Path(path)
    return decode(path.read_bytes(), source=str(path))


def read_header(path):
    with open(path, "rb") as fh:
        data = fh.read(HEADER.size)
    if len(data) < HEADER.size:
        raise DataError(f"{path}: truncated GVF1 header")
    magic, version, dtype, _, h, w, c = HEADER.unpack(data)
    if magic != MAGIC or version != 1 or dtype != 0:
        raise DataError(f"{path}: not a GVF1 v1 float32 file")
    return h, w, c
