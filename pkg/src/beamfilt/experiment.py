"""Experiment configuration, scenario sampling, and dataset manifests."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import room as room_mod
from .geometry import ArrayGeometry, ula
from .room import RoomScenario
from .stft import StftConfig
from .wavio import read_wav, write_wav

PROVIDERS = ("nearest_beam", "minnorm", "perfect_residual", "external_tensor")
DEFAULT_TEST_SIRS = (-5.0, -2.0, 0.0, 2.0, 5.0)
DEFAULT_BEAM_COUNTS = (10, 19, 37)


class ConfigError(ValueError):
    """Invalid experiment configuration or manifest."""


@dataclass
class ExperimentConfig:
    """Knobs for dataset generation, enhancement and evaluation runs."""

    stft: StftConfig = field(default_factory=StftConfig)
    num_mics: int = 9
    mic_spacing_m: float = 0.04
    num_beams: int = 19
    diag_loading: float = 1e-5
    provider: str = "nearest_beam"
    reference_channel: int = 0
    test_sirs_db: tuple = DEFAULT_TEST_SIRS
    room_xy_range: tuple = room_mod.ROOM_XY_RANGE
    room_z_range: tuple = room_mod.ROOM_Z_RANGE
    rt60_range: tuple = room_mod.RT60_RANGE
    source_dist_range: tuple = room_mod.SOURCE_DIST_RANGE
    angle_range_deg: tuple = (0.0, 180.0)
    min_separation_deg: float = 0.0
    utterance_len_s: float = 2.0
    seed: int = 0
    speech_dir: str | None = None
    noise_dir: str | None = None

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ConfigError(
                f"unknown provider {self.provider!r}; choose one of {PROVIDERS}"
            )
        if self.num_beams < 2:
            raise ConfigError("num_beams must be >= 2")
        if self.num_mics < 1 or self.mic_spacing_m <= 0:
            raise ConfigError("invalid array geometry")
        for name, rng in (
            ("room_xy_range", self.room_xy_range),
            ("room_z_range", self.room_z_range),
            ("rt60_range", self.rt60_range),
            ("source_dist_range", self.source_dist_range),
            ("angle_range_deg", self.angle_range_deg),
        ):
            if len(rng) != 2 or rng[0] > rng[1]:
                raise ConfigError(f"invalid range {name}={rng}")
        if self.utterance_len_s <= 0:
            raise ConfigError("utterance_len_s must be positive")

    def geometry(self) -> ArrayGeometry:
        return ula(self.num_mics, self.mic_spacing_m)

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["stft"] = {
            "sample_rate_hz": self.stft.sample_rate_hz,
            "frame_len_samples": self.stft.frame_len_samples,
            "hop_samples": self.stft.hop_samples,
            "fft_size": self.stft.fft_size,
        }
        for key in (
            "test_sirs_db", "room_xy_range", "room_z_range", "rt60_range",
            "source_dist_range", "angle_range_deg",
        ):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "stft" in d:
            try:
                d["stft"] = StftConfig(**d["stft"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid stft config: {exc}") from exc
        for key in (
            "test_sirs_db", "room_xy_range", "room_z_range", "rt60_range",
            "source_dist_range", "angle_range_deg",
        ):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON {path}: {exc}") from exc


def synth_speech(rng: np.random.Generator, n_samples: int, fs: int) -> np.ndarray:
    """Speech-like synthetic source: pitch-modulated harmonic stack with a
    syllabic amplitude envelope plus a touch of breath noise."""
    t = np.arange(n_samples) / fs
    pitch = rng.uniform(110.0, 220.0) * (
        1.0 + 0.1 * np.sin(2.0 * np.pi * rng.uniform(2.0, 4.0) * t)
    )
    phase = 2.0 * np.pi * np.cumsum(pitch) / fs
    x = np.zeros(n_samples)
    for k in range(1, 11):
        x += np.cos(k * phase + rng.uniform(0, 2 * np.pi)) / k
    envelope = 0.2 + 0.8 * np.abs(
        np.sin(2.0 * np.pi * rng.uniform(2.0, 5.0) * t + rng.uniform(0, np.pi))
    )
    x = x * envelope + 0.02 * rng.standard_normal(n_samples)
    return x / np.max(np.abs(x))


def synth_noise(rng: np.random.Generator, n_samples: int, fs: int) -> np.ndarray:
    """Colored interference: low-passed gaussian noise."""
    x = rng.standard_normal(n_samples)
    b = np.ones(8) / 8.0
    x = np.convolve(x, b, mode="same")
    return x / np.max(np.abs(x))


def _draw_from_pool(rng, pool_dir, n_samples, fs):
    files = sorted(
        f for f in os.listdir(pool_dir) if f.lower().endswith(".wav")
    )
    if not files:
        raise ConfigError(f"no WAV files in pool {pool_dir}")
    path = os.path.join(pool_dir, files[rng.integers(len(files))])
    rate, data = read_wav(path)
    if rate != fs:
        raise ConfigError(f"pool file {path} has rate {rate}, expected {fs}")
    x = data[0]
    if len(x) < n_samples:
        x = np.tile(x, -(-n_samples // len(x)))
    start = rng.integers(max(1, len(x) - n_samples + 1))
    x = x[start:start + n_samples]
    peak = np.max(np.abs(x))
    if peak == 0:
        raise ConfigError(f"silent pool file {path}")
    return x / peak


def _place_source(rng, room_dims, center, dist_range, angle_range, min_sep=None,
                  other_angle=None):
    """Draw an in-plane source position inside the room; rejection sampling
    over (angle, distance)."""
    margin = 0.1
    for _ in range(2000):
        theta = rng.uniform(*angle_range)
        if min_sep and other_angle is not None and abs(theta - other_angle) < min_sep:
            continue
        dist = rng.uniform(*dist_range)
        u = np.array([np.cos(np.radians(theta)), np.sin(np.radians(theta)), 0.0])
        pos = center + dist * u
        if np.all(pos > margin) and np.all(pos < room_dims - margin):
            return pos, theta
    raise ConfigError("could not place a source inside the room")


def sample_scenario(config: ExperimentConfig, sir_db: float,
                    seed: int, index: int) -> RoomScenario:
    """Deterministically sample one scenario from the configured ranges.

    Seeding is counter-based: stream (seed, index) is independent per item.
    """
    rng = np.random.default_rng([seed, index])
    fs = config.stft.sample_rate_hz
    n = int(round(config.utterance_len_s * fs))
    geom = config.geometry()

    for _ in range(200):
        dims = np.array([
            rng.uniform(*config.room_xy_range),
            rng.uniform(*config.room_xy_range),
            rng.uniform(*config.room_z_range),
        ])
        center = np.array([dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0])
        half_aperture = (config.num_mics - 1) * config.mic_spacing_m / 2.0
        if center[0] - half_aperture < 0.1 or center[0] + half_aperture > dims[0] - 0.1:
            continue
        try:
            target_pos, target_angle = _place_source(
                rng, dims, center, config.source_dist_range, config.angle_range_deg
            )
            intf_pos, _ = _place_source(
                rng, dims, center, config.source_dist_range,
                config.angle_range_deg, config.min_separation_deg, target_angle,
            )
        except ConfigError:
            continue
        rt60 = rng.uniform(*config.rt60_range)
        if config.speech_dir:
            target_sig = _draw_from_pool(rng, config.speech_dir, n, fs)
        else:
            target_sig = synth_speech(rng, n, fs)
        if config.noise_dir:
            intf_sig = _draw_from_pool(rng, config.noise_dir, n, fs)
        else:
            intf_sig = synth_noise(rng, n, fs)
        return RoomScenario(
            room_dims=dims,
            rt60=float(rt60),
            array_center=center,
            geometry=geom,
            target_position=target_pos,
            target_signal=target_sig,
            interference_position=intf_pos,
            interference_signal=intf_sig,
            sir_db=float(sir_db),
            sample_rate_hz=fs,
        )
    raise ConfigError("scenario sampling failed; check configured ranges")


def sample_scenarios(config: ExperimentConfig, count_per_sir: int,
                     seed: int | None = None) -> list[tuple[str, RoomScenario]]:
    """Sample count_per_sir scenarios for each SIR in the test grid.

    Returns (utterance_id, scenario) pairs; ids encode the SIR condition.
    """
    if count_per_sir < 1:
        raise ConfigError("count must be >= 1")
    if seed is None:
        seed = config.seed
    items = []
    index = 0
    for sir in config.test_sirs_db:
        for i in range(count_per_sir):
            utt_id = f"sir{sir:+05.1f}_{i:04d}".replace(".", "p")
            items.append((utt_id, sample_scenario(config, sir, seed, index)))
            index += 1
    return items


def scenario_to_dict(scenario: RoomScenario, target_wav: str, intf_wav: str) -> dict:
    return {
        "room_dims": scenario.room_dims.tolist(),
        "rt60": scenario.rt60,
        "array_center": scenario.array_center.tolist(),
        "mic_positions": scenario.geometry.mic_positions.tolist(),
        "target": {
            "position": scenario.target_position.tolist(),
            "dry_wav": target_wav,
        },
        "interference": {
            "position": scenario.interference_position.tolist(),
            "dry_wav": intf_wav,
        },
        "sir_db": scenario.sir_db,
        "sample_rate_hz": scenario.sample_rate_hz,
    }


def scenario_from_dict(d: dict, base_dir) -> RoomScenario:
    try:
        _, target_sig = read_wav(os.path.join(base_dir, d["target"]["dry_wav"]))
        _, intf_sig = read_wav(os.path.join(base_dir, d["interference"]["dry_wav"]))
        return RoomScenario(
            room_dims=d["room_dims"],
            rt60=d["rt60"],
            array_center=d["array_center"],
            geometry=ArrayGeometry(np.asarray(d["mic_positions"])),
            target_position=d["target"]["position"],
            target_signal=target_sig[0],
            interference_position=d["interference"]["position"],
            interference_signal=intf_sig[0],
            sir_db=d["sir_db"],
            sample_rate_hz=d["sample_rate_hz"],
        )
    except KeyError as exc:
        raise ConfigError(f"scenario JSON missing field {exc}") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_json(path, obj) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_manifest(path) -> dict:
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed manifest {path}: {exc}") from exc
    if "items" not in manifest:
        raise ConfigError(f"manifest {path} has no items")
    # Derived manifests (e.g. after enhancement) keep their item paths
    # relative to the dataset they were built from.
    if "source_manifest" in manifest:
        base = os.path.dirname(os.path.abspath(manifest["source_manifest"]))
    else:
        base = os.path.dirname(os.path.abspath(os.fspath(path)))
    for item in manifest["items"]:
        for key in ("scenario_json", "mixture_wav", "target_direct_wav",
                    "target_reverb_wav"):
            if key in item and not os.path.exists(os.path.join(base, item[key])):
                raise ConfigError(f"manifest references missing file {item[key]}")
    return manifest
