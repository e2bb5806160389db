"""Binary file formats: TVGRID01 grids, TVMAT001 matrices, and 16-bit PGM.

TVGRID01: 8-byte ASCII magic ``TVGRID01``, one text header line
``dims=<d1>x<d2>[x<d3>][ k=<index>]\\n``, then the row-major float64
little-endian payload.  The optional ``k=`` field tags frame-coefficient
dumps with their transform index.

TVMAT001: magic ``TVMAT001``, header ``shape=<M>x<N>\\n``, then the row-major
float64 little-endian entries.
"""

from __future__ import annotations

import numpy as np

from .grids import SignalGrid
from .operators import DenseOperator

GRID_MAGIC = b"TVGRID01"
MAT_MAGIC = b"TVMAT001"


def save_grid(path, grid: SignalGrid, k: int | None = None) -> None:
    header = "dims=" + "x".join(str(d) for d in grid.dims)
    if k is not None:
        header += f" k={int(k)}"
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write((header + "\n").encode("ascii"))
        fh.write(grid.data.astype("<f8").tobytes())


def load_grid(path):
    """Read a TVGRID01 file; returns (grid, k) with k None for plain grids."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != GRID_MAGIC:
            raise ValueError(f"bad magic {magic!r} in {path}")
        header = _read_header_line(fh, path)
        fields = dict(part.split("=", 1) for part in header.split())
        if "dims" not in fields:
            raise ValueError(f"missing dims in header of {path}")
        dims = tuple(int(d) for d in fields["dims"].split("x"))
        k = int(fields["k"]) if "k" in fields else None
        n = int(np.prod(dims))
        data = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if data.size != n:
            raise ValueError(f"truncated payload in {path}")
    return SignalGrid(dims, data), k


def save_operator(path, op: DenseOperator) -> None:
    m, n = op.shape
    with open(path, "wb") as fh:
        fh.write(MAT_MAGIC)
        fh.write(f"shape={m}x{n}\n".encode("ascii"))
        fh.write(op.entries.astype("<f8").tobytes())


def load_operator(path) -> DenseOperator:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAT_MAGIC:
            raise ValueError(f"bad magic {magic!r} in {path}")
        header = _read_header_line(fh, path)
        if not header.startswith("shape="):
            raise ValueError(f"missing shape in header of {path}")
        m, n = (int(v) for v in header[len("shape="):].split("x"))
        data = np.frombuffer(fh.read(8 * m * n), dtype="<f8")
        if data.size != m * n:
            raise ValueError(f"truncated payload in {path}")
    return DenseOperator(data.reshape(m, n))


def _read_header_line(fh, path) -> str:
    chars = bytearray()
    while True:
        b = fh.read(1)
        if not b:
            raise ValueError(f"unterminated header in {path}")
        if b == b"\n":
            break
        chars += b
        if len(chars) > 256:
            raise ValueError(f"header too long in {path}")
    return chars.decode("ascii")


def write_pgm(path, grid: SignalGrid) -> None:
    """16-bit binary PGM (P5), linearly scaled to [0, 65535] over the data range."""
    if grid.ndim != 2:
        raise ValueError("PGM export needs a 2-d grid")
    img = grid.asarray()
    lo = float(img.min())
    hi = float(img.max())
    if hi > lo:
        scaled = np.round((img - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(img)
    pixels = scaled.astype(">u2")  # PGM 16-bit is big-endian
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())
