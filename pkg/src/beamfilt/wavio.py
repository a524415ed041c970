"""Multichannel RIFF/WAVE I/O, 16-bit PCM or 32-bit float.

Samples are floats in [-1, 1] internally; integer PCM is converted on I/O.
"""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a WAV file; returns (sample_rate, data) with data (channels, samples)
    as float64 in [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    data = data.T
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    return int(rate), data


def write_wav(path, rate: int, data: np.ndarray, dtype: str = "float32") -> None:
    """Write (channels, samples) float data as a WAV file."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if dtype == "float32":
        out = data.T.astype(np.float32)
    elif dtype == "int16":
        out = np.clip(np.round(data.T * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError("dtype must be 'float32' or 'int16'")
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(path, rate, out)
