"""Objective evaluation: SI-SDR and ESTOI."""

from __future__ import annotations

from math import gcd

import numpy as np
import scipy.signal

SI_SDR_CAP_DB = 100.0

# ESTOI analysis constants (Jensen & Taal's extended intelligibility measure).
_ESTOI_FS = 10000
_FRAME = 256
_HOP = 128
_NFFT = 512
_NUM_BANDS = 15
_FIRST_CF = 150.0
_SEG_FRAMES = 30
_DYN_RANGE_DB = 40.0


def si_sdr(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +/-100.

    Both signals are zero-meaned; the reference is scaled by the projection
    coefficient alpha = <est, ref> / ||ref||^2 before the energy ratio.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if estimate.shape != reference.shape:
        raise ValueError("estimate and reference must have equal length")
    reference = reference - reference.mean()
    estimate = estimate - estimate.mean()
    ref_energy = reference @ reference
    if ref_energy == 0:
        raise ValueError("silent reference")
    alpha = (estimate @ reference) / ref_energy
    target = alpha * reference
    err = target - estimate
    err_energy = err @ err
    target_energy = target @ target
    if err_energy == 0:
        return SI_SDR_CAP_DB
    if target_energy == 0:
        return -SI_SDR_CAP_DB
    val = 10.0 * np.log10(target_energy / err_energy)
    return float(np.clip(val, -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def _third_octave_bands(fs: int, nfft: int, num_bands: int, first_cf: float):
    """Indicator matrix (num_bands, nfft//2+1) mapping FFT bins to 1/3-octave
    bands, nearest-bin band edges."""
    f = np.linspace(0.0, fs / 2.0, nfft // 2 + 1)
    k = np.arange(num_bands)
    cf = first_cf * 2.0 ** (k / 3.0)
    f_lo = cf * 2.0 ** (-1.0 / 6.0)
    f_hi = cf * 2.0 ** (1.0 / 6.0)
    h = np.zeros((num_bands, len(f)))
    for i in range(num_bands):
        lo = int(np.argmin(np.abs(f - f_lo[i])))
        hi = int(np.argmin(np.abs(f - f_hi[i])))
        h[i, lo:hi] = 1.0
    return h


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    n = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def _remove_silent_frames(x, y, dyn_range_db, frame, hop):
    """Drop frames whose reference energy is more than dyn_range_db below the
    loudest frame, then overlap-add the survivors back to waveforms."""
    w = np.hanning(frame + 2)[1:-1]
    xf = _frames(x, frame, hop) * w
    yf = _frames(y, frame, hop) * w
    energy_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(float).eps)
    keep = energy_db > energy_db.max() - dyn_range_db
    xf, yf = xf[keep], yf[keep]
    n = len(xf)
    if n == 0:
        raise ValueError("reference is entirely below the silence threshold")
    out_len = (n - 1) * hop + frame
    xs = np.zeros(out_len)
    ys = np.zeros(out_len)
    for t in range(n):
        sl = slice(t * hop, t * hop + frame)
        xs[sl] += xf[t]
        ys[sl] += yf[t]
    return xs, ys


def _band_envelopes(x: np.ndarray, band_matrix: np.ndarray) -> np.ndarray:
    """1/3-octave band magnitude envelopes, shape (num_bands, num_frames)."""
    w = np.hanning(_FRAME + 2)[1:-1]
    frames = _frames(x, _FRAME, _HOP) * w
    spec = np.abs(np.fft.rfft(frames, n=_NFFT, axis=1)) ** 2
    return np.sqrt(band_matrix @ spec.T)


def estoi(estimate: np.ndarray, reference: np.ndarray, fs: int) -> float:
    """Extended short-time objective intelligibility in [-1, 1].

    Both signals are resampled to 10 kHz, silent reference frames removed,
    decomposed into 15 one-third-octave band envelopes, and compared over
    384 ms segments with row- then column-normalized correlation.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if estimate.shape != reference.shape:
        raise ValueError("estimate and reference must have equal length")
    if fs != _ESTOI_FS:
        g = gcd(int(fs), _ESTOI_FS)
        estimate = scipy.signal.resample_poly(estimate, _ESTOI_FS // g, fs // g)
        reference = scipy.signal.resample_poly(reference, _ESTOI_FS // g, fs // g)
    if len(reference) < _FRAME + _HOP * (_SEG_FRAMES - 1):
        raise ValueError("clip too short for ESTOI analysis")

    reference, estimate = _remove_silent_frames(
        reference, estimate, _DYN_RANGE_DB, _FRAME, _HOP
    )
    band_matrix = _third_octave_bands(_ESTOI_FS, _NFFT, _NUM_BANDS, _FIRST_CF)
    ref_bands = _band_envelopes(reference, band_matrix)
    est_bands = _band_envelopes(estimate, band_matrix)
    n_frames = ref_bands.shape[1]
    if n_frames < _SEG_FRAMES:
        raise ValueError("clip too short for ESTOI analysis")

    eps = np.finfo(float).eps
    scores = []
    for m in range(_SEG_FRAMES, n_frames + 1):
        xs = ref_bands[:, m - _SEG_FRAMES:m]
        ys = est_bands[:, m - _SEG_FRAMES:m]
        # Row (band) normalization over time, then column (frame)
        # normalization over bands.
        xs = xs - xs.mean(axis=1, keepdims=True)
        xs = xs / (np.linalg.norm(xs, axis=1, keepdims=True) + eps)
        ys = ys - ys.mean(axis=1, keepdims=True)
        ys = ys / (np.linalg.norm(ys, axis=1, keepdims=True) + eps)
        xs = xs - xs.mean(axis=0, keepdims=True)
        xs = xs / (np.linalg.norm(xs, axis=0, keepdims=True) + eps)
        ys = ys - ys.mean(axis=0, keepdims=True)
        ys = ys / (np.linalg.norm(ys, axis=0, keepdims=True) + eps)
        scores.append(np.sum(xs * ys) / _SEG_FRAMES)
    return float(np.mean(scores))
