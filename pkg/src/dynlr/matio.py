"""Matrix serialization: plain CSV and the DLR1 binary format.

DLR1 layout (all little-endian): 4-byte magic ``DLR1``, u64 row count,
u64 column count, then ``rows * cols`` float64 values in row-major order.

CSV matrices are one row per line, comma-separated decimal values with a
``.`` radix and no header.  Floats are written with ``repr`` so a read/write
round trip is exact.
"""

import os
import struct
import tempfile

import numpy as np

_MAGIC = b"DLR1"


def save_dlr1(path, m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    with atomic_open(path) as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        fh.write(np.ascontiguousarray(m).astype("<f8").tobytes())


def load_dlr1(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape(rows, cols).copy()


def save_csv(path, m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    with atomic_open(path, text=True) as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_csv(path):
    rows = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


class atomic_open:
    """Write to a temp file in the target directory, rename on success."""

    def __init__(self, path, text=False):
        self.path = os.fspath(path)
        self.text = text
        self._tmp = None

    def __enter__(self):
        d = os.path.dirname(self.path) or "."
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
        self._tmp = tmp
        self._fh = os.fdopen(fd, "w" if self.text else "wb")
        return self._fh

    def __exit__(self, exc_type, exc, tb):
        self._fh.close()
        if exc_type is None:
            os.replace(self._tmp, self.path)
        else:
            os.unlink(self._tmp)
        return False


def save_pgm16(path, frame, data_max):
    """Write one grayscale frame as binary 16-bit PGM (maxval 65535).

    Intensities are mapped linearly from ``[0, data_max]``; samples are
    big-endian per the PGM convention.  Row 0 of the array becomes the top
    image row.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ValueError("PGM export needs a 2-d frame")
    if data_max <= 0:
        data_max = 1.0
    scaled = np.clip(frame / data_max, 0.0, 1.0)
    pix = np.round(scaled * 65535.0).astype(">u2")
    with atomic_open(path) as fh:
        fh.write(f"P5\n{frame.shape[1]} {frame.shape[0]}\n65535\n".encode())
        fh.write(pix.tobytes())
