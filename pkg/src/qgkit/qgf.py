"""QGF1 binary snapshot format.

Little-endian.  Header: magic "QGF1" (4 bytes), u32 nx, u32 ny, u32 nlayers,
f64 dx, f64 dy, f64 x0, f64 y0, f64 time; then nlayers row-major (C order)
float64 arrays of shape (nx, ny).
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"QGF1"
_HEADER = struct.Struct("<4sIIIddddd")


def write_snapshot(path, grid, time, layers):
    """Write per-layer (nx, ny) arrays to a QGF1 file."""
    layers = [np.ascontiguousarray(a, dtype="<f8") for a in layers]
    for a in layers:
        if a.shape != grid.shape:
            raise ValueError(f"layer shape {a.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, grid.nx, grid.ny, len(layers), grid.dx, grid.dy, grid.x0, grid.y0, time
            )
        )
        for a in layers:
            fh.write(a.tobytes(order="C"))


def read_snapshot(path):
    """Read a QGF1 file.

    Returns (header dict, list of (nx, ny) float arrays).  The header carries
    nx, ny, nlayers, dx, dy, x0, y0, time; topology is not part of the format.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, nx, ny, nlayers, dx, dy, x0, y0, time = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a QGF1 file (magic {magic!r})")
        count = nx * ny
        layers = []
        for _ in range(nlayers):
            data = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count)
            layers.append(data.reshape(nx, ny).copy())
    header = {
        "nx": nx, "ny": ny, "nlayers": nlayers,
        "dx": dx, "dy": dy, "x0": x0, "y0": y0, "time": time,
    }
    return header, layers
