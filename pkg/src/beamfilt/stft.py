"""STFT analysis/synthesis with Hann framing and weighted overlap-add."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters: 32 ms Hann frames with 50% overlap at 16 kHz."""

    sample_rate_hz: int = 16000
    frame_len_samples: int = 512
    hop_samples: int = 256
    fft_size: int = 512

    def __post_init__(self):
        if self.frame_len_samples <= 0 or self.hop_samples <= 0:
            raise ValueError("frame length and hop must be positive")
        if self.frame_len_samples % self.hop_samples != 0:
            raise ValueError("hop must divide frame length")
        if self.frame_len_samples > self.fft_size:
            raise ValueError("frame length must not exceed FFT size")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n (sums to 1 across 50% overlapped shifts)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass
class MultichannelSpectrogram:
    """Complex STFT tensor, shape (num_channels, num_frames, num_bins)."""

    data: np.ndarray
    config: StftConfig
    num_samples: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError("spectrogram data must be 3-D (channel, frame, bin)")
        if self.data.shape[2] != self.config.num_bins:
            raise ValueError(
                f"bin count {self.data.shape[2]} does not match config "
                f"({self.config.num_bins})"
            )

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_bins(self) -> int:
        return self.data.shape[2]

    def channel(self, m: int) -> np.ndarray:
        return self.data[m]


def analyze(wave: np.ndarray, cfg: StftConfig | None = None) -> MultichannelSpectrogram:
    """Multichannel STFT.

    Arguments:
        wave: (num_channels, num_samples) or (num_samples,) float array
        cfg: framing parameters

    Returns spectrogram of shape (M, T, F) with F = fft_size/2 + 1.  The
    input is zero-padded by one hop at the start and to a whole number of
    hops at the end, so reconstruction guarantees exclude one frame of
    margin at each edge.
    """
    if cfg is None:
        cfg = StftConfig()
    wave = np.atleast_2d(np.asarray(wave, dtype=np.float64))
    if wave.ndim != 2:
        raise ValueError("wave must be 1-D or 2-D (channel, sample)")
    num_channels, num_samples = wave.shape
    if num_samples == 0:
        raise ValueError("zero-length input")

    frame = cfg.frame_len_samples
    hop = cfg.hop_samples
    pad_left = frame - hop
    num_frames = max(1, -(-(num_samples + pad_left - frame) // hop) + 1)
    padded_len = (num_frames - 1) * hop + frame
    padded = np.zeros((num_channels, padded_len))
    padded[:, pad_left:pad_left + num_samples] = wave

    window = hann_window(frame)
    idx = np.arange(frame)[None, :] + hop * np.arange(num_frames)[:, None]
    frames = padded[:, idx] * window
    spec = np.fft.rfft(frames, n=cfg.fft_size, axis=-1)
    return MultichannelSpectrogram(spec, cfg, num_samples=num_samples)


def synthesize(spec: MultichannelSpectrogram) -> np.ndarray:
    """Inverse STFT by weighted overlap-add (Hann analysis x Hann synthesis).

    Returns a (num_channels, num_samples) float array.  If the spectrogram
    records its source length the output is trimmed to it, otherwise the
    full de-padded overlap-add is returned.
    """
    cfg = spec.config
    frame = cfg.frame_len_samples
    hop = cfg.hop_samples
    pad_left = frame - hop
    num_channels, num_frames, _ = spec.data.shape

    window = hann_window(frame)
    frames = np.fft.irfft(spec.data, n=cfg.fft_size, axis=-1)[..., :frame]
    frames = frames * window

    out_len = (num_frames - 1) * hop + frame
    out = np.zeros((num_channels, out_len))
    wsum = np.zeros(out_len)
    for t in range(num_frames):
        sl = slice(t * hop, t * hop + frame)
        out[:, sl] += frames[:, t, :]
        wsum[sl] += window * window
    nz = wsum > 1e-12
    out[:, nz] /= wsum[nz]

    if spec.num_samples is not None:
        if pad_left + spec.num_samples > out_len:
            raise ValueError("recorded sample count exceeds overlap-add length")
        return out[:, pad_left:pad_left + spec.num_samples]
    return out[:, pad_left:]
