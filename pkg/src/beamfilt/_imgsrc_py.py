"""Pure-numpy image-source accumulation kernel (fallback for the compiled
extension).  Shares the per-axis offset/amplitude table layout with the
Cython kernel in _imgsrc.pyx."""

from __future__ import annotations

import numpy as np

_CHUNK = 64


def rir_core(
    off_x: np.ndarray,
    amp_x: np.ndarray,
    off_y: np.ndarray,
    amp_y: np.ndarray,
    off_z: np.ndarray,
    amp_z: np.ndarray,
    fs: float,
    c: float,
    n_samples: int,
) -> np.ndarray:
    """Accumulate image-source taps into an impulse response.

    Each axis table holds, per image index, the source-to-mic coordinate
    offset and the product of wall reflection coefficients along that axis.
    Tap amplitude is amp_x amp_y amp_z / (4 pi d), tap delay round(d fs / c).
    """
    h = np.zeros(n_samples)
    oy2 = off_y[:, None] ** 2
    oz2 = off_z[None, :] ** 2
    amp_yz = amp_y[:, None] * amp_z[None, :]
    for start in range(0, len(off_x), _CHUNK):
        ox = off_x[start:start + _CHUNK]
        ax = amp_x[start:start + _CHUNK]
        d = np.sqrt(ox[:, None, None] ** 2 + (oy2 + oz2)[None])
        amp = ax[:, None, None] * amp_yz[None] / (4.0 * np.pi * d)
        idx = np.floor(d * fs / c + 0.5).astype(np.int64)
        mask = idx < n_samples
        h += np.bincount(
            idx[mask].ravel(), weights=amp[mask].ravel(), minlength=n_samples
        )[:n_samples]
    return h
