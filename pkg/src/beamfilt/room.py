"""Image-method room impulse responses and SIR-controlled mixture synthesis."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache as _lru_cache

import numpy as np
import scipy.signal

from .geometry import SPEED_OF_SOUND, ArrayGeometry, Doa

# Kernel selection: compiled extension when available, numpy fallback
# otherwise; BEAMFILT_FORCE_PY=1 forces the fallback.
if os.environ.get("BEAMFILT_FORCE_PY"):
    from ._imgsrc_py import rir_core as _rir_core

    KERNEL_BACKEND = "python"
else:
    try:
        from ._imgsrc import rir_core as _rir_core

        KERNEL_BACKEND = "cython"
    except ImportError:
        from ._imgsrc_py import rir_core as _rir_core

        KERNEL_BACKEND = "python"

MAX_RIR_SECONDS = 1.0
SIR_CAP_DB = 60.0

RT60_RANGE = (0.05, 0.7)
ROOM_XY_RANGE = (3.0, 10.0)
ROOM_Z_RANGE = (2.5, 3.0)
SOURCE_DIST_RANGE = (0.5, 3.0)


def eyring_reflection(room_dims, rt60: float) -> float:
    """Uniform wall reflection coefficient from Eyring's reverberation relation:
    alpha = 1 - exp(-0.161 V / (S rt60)), coefficient sqrt(1 - alpha)."""
    if rt60 <= 0:
        raise ValueError("rt60 must be positive")
    lx, ly, lz = (float(v) for v in room_dims)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 1.0 - np.exp(-0.161 * volume / (surface * rt60))
    return float(np.sqrt(1.0 - alpha))


def _probe_rt60(room_dims, coeff: float, fs: int = 16000) -> float:
    """Schroeder RT60 of a probe impulse response with the given coefficient.

    Deterministic source/mic placement; returns inf when the decay never
    reaches the fit range (coefficient too high for the probe length).
    """
    room = np.asarray(room_dims, dtype=np.float64)
    src = room * np.array([0.3, 0.45, 0.5])
    mic = room * np.array([0.7, 0.55, 0.5])
    h = image_method_rir(room, coeff, src, mic, fs, length_s=1.0)
    energy = np.cumsum(h[::-1] ** 2)[::-1]
    decay_db = 10.0 * np.log10(np.maximum(energy / energy[0], 1e-30))
    if not np.any(decay_db <= -35.0):
        return np.inf
    t5 = np.argmax(decay_db <= -5.0) / fs
    t35 = np.argmax(decay_db <= -35.0) / fs
    # The backward integral always plunges near the truncation point; a -35 dB
    # crossing in that region means the true decay was never observed.
    if t35 > 0.8 * len(h) / fs:
        return np.inf
    return 2.0 * (t35 - t5)


@_lru_cache(maxsize=256)
def _calibrated_reflection(dims_key: tuple, rt60: float) -> float:
    lo, hi = 1e-4, 0.9999
    if _probe_rt60(dims_key, lo) > rt60:
        raise ValueError(
            f"rt60={rt60} s is unreachable in a "
            f"{dims_key[0]}x{dims_key[1]}x{dims_key[2]} room (too short)"
        )
    for _ in range(18):
        mid = 0.5 * (lo + hi)
        if _probe_rt60(dims_key, mid) < rt60:
            lo = mid
        else:
            hi = mid
    coeff = 0.5 * (lo + hi)
    achieved = _probe_rt60(dims_key, coeff)
    if not np.isfinite(achieved) or abs(achieved - rt60) > 0.35 * rt60:
        raise ValueError(
            f"rt60={rt60} s is unreachable in a "
            f"{dims_key[0]}x{dims_key[1]}x{dims_key[2]} room "
            "(reflection coefficient would exceed 0.9999)"
        )
    return coeff


def rt60_to_reflection(room_dims, rt60: float) -> float:
    """Uniform wall reflection coefficient realizing the requested RT60.

    Eyring's relation systematically under-predicts the decay time of the
    specular image model (by a room-shape-dependent 1.3-1.9x), so the
    coefficient is calibrated by bisection against a Schroeder estimate of a
    probe impulse response.  Monotone in rt60; raises for geometrically
    unreachable targets.
    """
    if rt60 <= 0:
        raise ValueError("rt60 must be positive")
    dims_key = tuple(round(float(v), 6) for v in room_dims)
    return _calibrated_reflection(dims_key, round(float(rt60), 6))


def _axis_tables(length, src, mic, beta, n_max):
    """Per-axis image tables: coordinate offsets and reflection products.

    For image order n and parity p: offset = (1-2p) src + 2 n L - mic,
    amplitude = beta^(|n-p| + |n|) for uniform walls.
    """
    n = np.arange(-n_max, n_max + 1)
    offs, amps = [], []
    for p in (0, 1):
        offs.append((1 - 2 * p) * src + 2.0 * n * length - mic)
        amps.append(beta ** (np.abs(n - p) + np.abs(n)))
    return np.concatenate(offs), np.concatenate(amps)


def image_method_rir(
    room_dims,
    reflection: float,
    source_pos,
    mic_pos,
    fs: int,
    *,
    c: float = SPEED_OF_SOUND,
    length_s: float | None = None,
    max_order: int | None = None,
) -> np.ndarray:
    """Image-method room impulse response for one (source, mic) pair.

    Fractional delays are rounded to the nearest sample.  The image grid is
    sized so images up to the RIR length contribute, unless max_order caps it.
    """
    room = np.asarray(room_dims, dtype=np.float64)
    src = np.asarray(source_pos, dtype=np.float64)
    mic = np.asarray(mic_pos, dtype=np.float64)
    if np.any(src <= 0) or np.any(src >= room):
        raise ValueError("source outside room")
    if np.any(mic <= 0) or np.any(mic >= room):
        raise ValueError("microphone outside room")
    if not (0.0 <= reflection <= 0.9999):
        raise ValueError("reflection coefficient must lie in [0, 0.9999]")

    if length_s is None:
        length_s = MAX_RIR_SECONDS
    length_s = min(length_s, MAX_RIR_SECONDS)
    n_samples = max(1, int(np.ceil(length_s * fs)))

    tables = []
    for axis in range(3):
        if max_order is not None:
            n_max = max_order
        else:
            n_max = int(np.ceil(c * length_s / (2.0 * room[axis]))) + 1
        tables.append(
            _axis_tables(room[axis], src[axis], mic[axis], reflection, n_max)
        )
    (ox, ax), (oy, ay), (oz, az) = tables
    return _rir_core(ox, ax, oy, ay, oz, az, float(fs), c, n_samples)


@dataclass(eq=False)
class RoomScenario:
    """One simulated scene: a shoebox room, a target and one point interferer.

    Positions are absolute room coordinates in meters; the microphone
    geometry is placed relative to array_center.
    """

    room_dims: np.ndarray
    rt60: float
    array_center: np.ndarray
    geometry: ArrayGeometry
    target_position: np.ndarray
    target_signal: np.ndarray
    interference_position: np.ndarray
    interference_signal: np.ndarray
    sir_db: float
    sample_rate_hz: int = 16000

    def __post_init__(self):
        self.room_dims = np.asarray(self.room_dims, dtype=np.float64)
        self.array_center = np.asarray(self.array_center, dtype=np.float64)
        self.target_position = np.asarray(self.target_position, dtype=np.float64)
        self.interference_position = np.asarray(
            self.interference_position, dtype=np.float64
        )
        self.target_signal = np.asarray(self.target_signal, dtype=np.float64)
        self.interference_signal = np.asarray(
            self.interference_signal, dtype=np.float64
        )
        self._validate()

    def _validate(self):
        lx, ly, lz = self.room_dims
        if not (ROOM_XY_RANGE[0] <= lx <= ROOM_XY_RANGE[1]
                and ROOM_XY_RANGE[0] <= ly <= ROOM_XY_RANGE[1]
                and ROOM_Z_RANGE[0] <= lz <= ROOM_Z_RANGE[1]):
            raise ValueError(f"room dims {self.room_dims} outside supported ranges")
        if not (RT60_RANGE[0] <= self.rt60 <= RT60_RANGE[1]):
            raise ValueError(f"rt60 {self.rt60} outside {RT60_RANGE}")
        for name, pos in (
            ("target", self.target_position),
            ("interference", self.interference_position),
            ("array center", self.array_center),
        ):
            if np.any(pos <= 0) or np.any(pos >= self.room_dims):
                raise ValueError(f"{name} position {pos} not strictly inside room")
        for pos in self.mic_positions_abs():
            if np.any(pos <= 0) or np.any(pos >= self.room_dims):
                raise ValueError("microphone outside room")
        for name, pos in (
            ("target", self.target_position),
            ("interference", self.interference_position),
        ):
            dist = np.linalg.norm(pos - self.array_center)
            if not (SOURCE_DIST_RANGE[0] <= dist <= SOURCE_DIST_RANGE[1]):
                raise ValueError(
                    f"{name} distance {dist:.3f} m outside {SOURCE_DIST_RANGE}"
                )
        theta = self.target_doa().azimuth_deg
        if not (0.0 <= theta <= 180.0):
            raise ValueError(f"target azimuth {theta} outside [0, 180]")

    def mic_positions_abs(self) -> np.ndarray:
        return self.array_center[None, :] + self.geometry.mic_positions

    def _doa_of(self, position: np.ndarray) -> Doa:
        d = position - self.array_center
        theta = np.degrees(np.arctan2(np.hypot(d[1], d[2]), d[0]))
        return Doa(float(theta))

    def target_doa(self) -> Doa:
        return self._doa_of(self.target_position)

    def interference_doa(self) -> Doa:
        return self._doa_of(self.interference_position)


def scenario_rirs(
    scenario: RoomScenario, source_pos, *, anechoic: bool = False
) -> np.ndarray:
    """Stack of RIRs from one source to every microphone, shape (M, L)."""
    if anechoic:
        reflection = 0.0
        mics = scenario.mic_positions_abs()
        max_dist = max(np.linalg.norm(np.asarray(source_pos) - m) for m in mics)
        length_s = max_dist / SPEED_OF_SOUND + 0.01
    else:
        reflection = rt60_to_reflection(scenario.room_dims, scenario.rt60)
        length_s = min(scenario.rt60 + 0.1, MAX_RIR_SECONDS)
    rirs = [
        image_method_rir(
            scenario.room_dims,
            reflection,
            source_pos,
            mic,
            scenario.sample_rate_hz,
            length_s=length_s,
        )
        for mic in scenario.mic_positions_abs()
    ]
    max_len = max(len(r) for r in rirs)
    return np.stack([np.pad(r, (0, max_len - len(r))) for r in rirs])


def _convolve_multichannel(dry: np.ndarray, rirs: np.ndarray, n_out: int) -> np.ndarray:
    out = np.zeros((rirs.shape[0], n_out))
    for m in range(rirs.shape[0]):
        y = scipy.signal.fftconvolve(dry, rirs[m])
        out[m, :min(n_out, len(y))] = y[:n_out]
    return out


def simulate_mixture(scenario: RoomScenario, *, anechoic: bool = False) -> dict:
    """Render the scene to microphone signals.

    Returns a dict with keys:
      mixture        (M, L) reverberant target + scaled interference
      target_direct  (M, L) direct-path-only target component
      target_reverb  (M, L) reverberant target component
      interference   (M, L) scaled reverberant interference component
      gain           scalar applied to the interference for the requested SIR
    The SIR is measured between the reverberant components at mic 0.
    """
    if not np.any(scenario.target_signal) or not np.any(scenario.interference_signal):
        raise ValueError("silent dry source; SIR scaling is undefined")

    fs = scenario.sample_rate_hz
    rir_t = scenario_rirs(scenario, scenario.target_position, anechoic=anechoic)
    rir_i = scenario_rirs(scenario, scenario.interference_position, anechoic=anechoic)
    rir_d = scenario_rirs(scenario, scenario.target_position, anechoic=True)

    n_out = max(
        len(scenario.target_signal) + rir_t.shape[1],
        len(scenario.interference_signal) + rir_i.shape[1],
    ) - 1
    target_reverb = _convolve_multichannel(scenario.target_signal, rir_t, n_out)
    target_direct = _convolve_multichannel(scenario.target_signal, rir_d, n_out)
    interference = _convolve_multichannel(
        scenario.interference_signal, rir_i, n_out
    )

    p_target = np.mean(target_reverb[0] ** 2)
    p_intf = np.mean(interference[0] ** 2)
    if p_intf == 0 or p_target == 0:
        raise ValueError("silent rendered component; SIR scaling is undefined")
    sir = float(np.clip(scenario.sir_db, -SIR_CAP_DB, SIR_CAP_DB))
    gain = float(np.sqrt(p_target / (p_intf * 10.0 ** (sir / 10.0))))
    interference = gain * interference

    return {
        "mixture": target_reverb + interference,
        "target_direct": target_direct,
        "target_reverb": target_reverb,
        "interference": interference,
        "gain": gain,
    }


def schroeder_rt60(rir: np.ndarray, fs: int, lo_db: float = -5.0, hi_db: float = -35.0) -> float:
    """RT60 estimate by backward integration and a linear fit on the
    [lo_db, hi_db] decay range, extrapolated to -60 dB."""
    energy = np.cumsum(rir[::-1] ** 2)[::-1]
    energy = energy / energy[0]
    with np.errstate(divide="ignore"):
        decay_db = 10.0 * np.log10(np.maximum(energy, 1e-30))
    idx = np.where((decay_db <= lo_db) & (decay_db >= hi_db))[0]
    if len(idx) < 2:
        raise ValueError("decay range too short for a Schroeder fit")
    t = idx / fs
    slope, intercept = np.polyfit(t, decay_db[idx], 1)
    if slope >= 0:
        raise ValueError("non-decaying impulse response")
    return float(-60.0 / slope)
