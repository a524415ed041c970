"""Microphone-array geometry and far-field plane-wave steering vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stft import StftConfig

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class Doa:
    """Direction of arrival in the array plane.

    ULA convention: 0 deg = endfire toward increasing mic index,
    90 deg = broadside.
    """

    azimuth_deg: float

    def __post_init__(self):
        if not (0.0 <= self.azimuth_deg <= 180.0):
            raise ValueError("azimuth must lie in [0, 180] degrees")

    def unit_vector(self) -> np.ndarray:
        theta = np.radians(self.azimuth_deg)
        return np.array([np.cos(theta), np.sin(theta), 0.0])


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions in meters, shape (M, 3)."""

    mic_positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("mic_positions must be (M, 3)")
        if pos.shape[0] < 1:
            raise ValueError("need at least one microphone")
        if not np.all(np.isfinite(pos)):
            raise ValueError("mic positions must be finite")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    def pairwise_distances(self) -> np.ndarray:
        """Symmetric (M, M) matrix of inter-mic distances l_ij."""
        diff = self.mic_positions[:, None, :] - self.mic_positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)


def ula(num_mics: int, spacing_m: float) -> ArrayGeometry:
    """Uniform linear array along the x axis, centered on the origin."""
    if num_mics < 1:
        raise ValueError("need at least one microphone")
    if spacing_m <= 0:
        raise ValueError("spacing must be positive")
    x = (np.arange(num_mics) - (num_mics - 1) / 2.0) * spacing_m
    pos = np.zeros((num_mics, 3))
    pos[:, 0] = x
    return ArrayGeometry(pos)


def steering_vector(
    geom: ArrayGeometry, doa: Doa, f_bin: int, cfg: StftConfig
) -> np.ndarray:
    """Far-field steering vector at one frequency bin.

    Element m is exp(-j 2 pi f_phys tau_m) with tau_m the plane-wave delay
    of mic m relative to the array centroid; tau_m is positive for mics
    farther from the source.
    """
    if not (0 <= f_bin < cfg.num_bins):
        raise ValueError(f"bin {f_bin} out of range [0, {cfg.num_bins})")
    f_phys = cfg.sample_rate_hz * f_bin / cfg.fft_size
    u = doa.unit_vector()
    tau = -((geom.mic_positions - geom.centroid) @ u) / geom.speed_of_sound
    return np.exp(-2j * np.pi * f_phys * tau)
