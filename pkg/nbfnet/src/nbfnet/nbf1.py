"""NBF1 tensor container I/O.

This is the serialization boundary shared with the beamfilt toolkit:
magic "NBF1", little-endian u32 fields {rank, dims..., dtype code}, then the
payload row-major.  Dtype code 0 is complex64 stored as interleaved re/im
float32.  Implemented here independently so this package depends on the
format, not on the other package's internals.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

MAGIC = b"NBF1"
DTYPE_COMPLEX64 = 0


class Nbf1FormatError(ValueError):
    """Malformed NBF1 container."""


def write_nbf1(path, tensor: np.ndarray) -> None:
    """Write a tensor atomically (temp file + rename)."""
    tensor = np.asarray(tensor, dtype=np.complex64)
    header = MAGIC + struct.pack("<I", tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
    header += struct.pack("<I", DTYPE_COMPLEX64)
    payload = tensor.astype("<c8", copy=False).tobytes()

    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_nbf1(path) -> np.ndarray:
    """Read a tensor; raises Nbf1FormatError on a malformed header."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise Nbf1FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (rank,) = struct.unpack("<I", fh.read(4))
        if rank > 16:
            raise Nbf1FormatError(f"implausible rank {rank}")
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        (code,) = struct.unpack("<I", fh.read(4))
        if code != DTYPE_COMPLEX64:
            raise Nbf1FormatError(f"unknown dtype code {code}")
        count = int(np.prod(dims)) if rank else 1
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise Nbf1FormatError("truncated payload")
        data = np.frombuffer(raw, dtype=np.float32).view(np.complex64)
    return data.reshape(dims).copy()
