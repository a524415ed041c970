"""Super-directive beamformer bank: design against a diffuse noise field
and application to multichannel spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import ArrayGeometry, Doa, steering_vector
from .stft import MultichannelSpectrogram, StftConfig

DEFAULT_DIAG_LOADING = 1e-5

# Relative eigenvalue cutoff used for the unloaded (eps = 0) design, where the
# diffuse coherence matrix is numerically rank-deficient at low frequencies.
_EIG_RCOND = 1e-10


def diffuse_coherence(geom: ArrayGeometry, f_bin: int, cfg: StftConfig) -> np.ndarray:
    """Spatial coherence matrix of an isotropic diffuse field at one bin.

    Entry (i, j) is sinc(2 pi f_s f l_ij / (N c)) with sinc(x) = sin(x)/x.
    """
    if not (0 <= f_bin < cfg.num_bins):
        raise ValueError(f"bin {f_bin} out of range [0, {cfg.num_bins})")
    l = geom.pairwise_distances()
    arg = 2.0 * np.pi * cfg.sample_rate_hz * f_bin * l / (cfg.fft_size * geom.speed_of_sound)
    # np.sinc is the normalized sin(pi x)/(pi x); rescale to sin(x)/x.
    return np.sinc(arg / np.pi)


def _solve_coherence(gamma: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    """Solve (Gamma + eps I) y = v, stably for both loaded and unloaded designs."""
    m = gamma.shape[0]
    if eps > 0:
        return scipy.linalg.solve(gamma + eps * np.eye(m), v, assume_a="pos")
    # eps = 0: Gamma can be singular to working precision at low frequencies;
    # a truncated eigendecomposition keeps |w^H v - 1| at the 1e-12 level.
    lam, u = np.linalg.eigh(gamma)
    if lam.max() <= 0:
        raise np.linalg.LinAlgError("coherence matrix is singular")
    keep = lam > _EIG_RCOND * lam.max()
    if not np.any(keep):
        raise np.linalg.LinAlgError("coherence matrix is singular")
    coeff = u.conj().T @ v
    return u[:, keep] @ (coeff[keep] / lam[keep])


def sd_weights(
    geom: ArrayGeometry,
    look: Doa,
    f_bin: int,
    eps: float,
    cfg: StftConfig,
) -> np.ndarray:
    """Super-directive weights w = (Gamma + eps I)^-1 v / (v^H (Gamma + eps I)^-1 v).

    Satisfies the distortionless constraint w^H v = 1.  The unloaded design
    (eps = 0) refuses bin 0 where Gamma is the all-ones matrix.
    """
    if eps < 0:
        raise ValueError("diagonal loading must be non-negative")
    if eps == 0 and f_bin == 0:
        raise np.linalg.LinAlgError(
            "coherence matrix at bin 0 is singular; use eps > 0"
        )
    gamma = diffuse_coherence(geom, f_bin, cfg)
    v = steering_vector(geom, look, f_bin, cfg)
    y = _solve_coherence(gamma, v, eps)
    denom = v.conj() @ y
    if denom == 0 or not np.isfinite(denom):
        raise np.linalg.LinAlgError(f"singular design at bin {f_bin}")
    return y / denom


@dataclass(eq=False)
class FixedBeamformerBank:
    """Fixed beam weights, shape (num_beams, num_bins, num_mics)."""

    weights: np.ndarray
    look_angles: list[Doa]
    diag_loading: float
    geometry: ArrayGeometry
    config: StftConfig

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.complex128)
        if self.weights.ndim != 3:
            raise ValueError("weights must be (D, F, M)")
        d, f, m = self.weights.shape
        if d != len(self.look_angles):
            raise ValueError("look_angles length must match beam count")
        if f != self.config.num_bins or m != self.geometry.num_mics:
            raise ValueError("weight dims do not match config/geometry")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite beam weights")

    @property
    def num_beams(self) -> int:
        return self.weights.shape[0]

    @property
    def num_mics(self) -> int:
        return self.weights.shape[2]


@dataclass(eq=False)
class BeamSet:
    """Beam-domain spectrograms, shape (num_beams, num_frames, num_bins)."""

    beams: np.ndarray
    bank: FixedBeamformerBank

    def __post_init__(self):
        self.beams = np.asarray(self.beams, dtype=np.complex128)
        if self.beams.ndim != 3:
            raise ValueError("beams must be (D, T, F)")
        if self.beams.shape[0] != self.bank.num_beams:
            raise ValueError("beam count does not match bank")

    @property
    def num_beams(self) -> int:
        return self.beams.shape[0]

    @property
    def num_frames(self) -> int:
        return self.beams.shape[1]

    @property
    def num_bins(self) -> int:
        return self.beams.shape[2]


def uniform_look_angles(num_beams: int) -> list[Doa]:
    """D look directions spanning [0, 180] inclusive: theta_d = d * 180 / (D - 1)."""
    if num_beams < 2:
        raise ValueError("need at least two beams")
    return [Doa(d * 180.0 / (num_beams - 1)) for d in range(num_beams)]


def design_bank(
    geom: ArrayGeometry,
    num_beams: int,
    eps: float = DEFAULT_DIAG_LOADING,
    cfg: StftConfig | None = None,
) -> FixedBeamformerBank:
    """Design a bank of D super-directive beams on the uniform angular grid."""
    if cfg is None:
        cfg = StftConfig()
    if eps <= 0:
        raise np.linalg.LinAlgError(
            "bank design covers bin 0 where the unloaded system is singular; "
            "use eps > 0"
        )
    looks = uniform_look_angles(num_beams)
    weights = np.empty((num_beams, cfg.num_bins, geom.num_mics), dtype=np.complex128)
    eye = eps * np.eye(geom.num_mics)
    for f in range(cfg.num_bins):
        gamma = diffuse_coherence(geom, f, cfg) + eye
        v = np.stack([steering_vector(geom, look, f, cfg) for look in looks], axis=1)
        y = scipy.linalg.solve(gamma, v, assume_a="pos")
        denom = np.einsum("md,md->d", v.conj(), y)
        weights[:, f, :] = (y / denom).T
    return FixedBeamformerBank(weights, looks, eps, geom, cfg)


def apply_bank(bank: FixedBeamformerBank, spec: MultichannelSpectrogram) -> BeamSet:
    """Form beam outputs B_d(t, f) = w_d^H(f) Y(t, f) for every beam."""
    if spec.num_channels != bank.num_mics:
        raise ValueError(
            f"spectrogram has {spec.num_channels} channels, bank expects "
            f"{bank.num_mics}"
        )
    if spec.num_bins != bank.config.num_bins:
        raise ValueError("bin counts do not match")
    beams = np.einsum("dfm,mtf->dtf", bank.weights.conj(), spec.data)
    return BeamSet(beams, bank)


def beam_pattern(
    bank: FixedBeamformerBank,
    d: int,
    f_bin: int,
    angles_deg: np.ndarray,
) -> np.ndarray:
    """Power response |w_d^H v(theta)|^2 over a grid of arrival angles."""
    w = bank.weights[d, f_bin]
    gains = np.empty(len(angles_deg))
    for i, theta in enumerate(np.asarray(angles_deg, dtype=np.float64)):
        v = steering_vector(bank.geometry, Doa(theta), f_bin, bank.config)
        gains[i] = np.abs(w.conj() @ v) ** 2
    return gains


def white_noise_gain(bank: FixedBeamformerBank, d: int, f_bin: int) -> float:
    """WNG = |w^H v|^2 / (w^H w) at the beam's own look direction."""
    w = bank.weights[d, f_bin]
    v = steering_vector(bank.geometry, bank.look_angles[d], f_bin, bank.config)
    return float(np.abs(w.conj() @ v) ** 2 / np.real(w.conj() @ w))


def directivity_index(bank: FixedBeamformerBank, d: int, f_bin: int) -> float:
    """DI = 10 log10(|w^H v|^2 / (w^H Gamma w)) in dB, with unloaded Gamma."""
    w = bank.weights[d, f_bin]
    v = steering_vector(bank.geometry, bank.look_angles[d], f_bin, bank.config)
    gamma = diffuse_coherence(bank.geometry, f_bin, bank.config)
    num = np.abs(w.conj() @ v) ** 2
    den = np.real(w.conj() @ gamma @ w)
    return float(10.0 * np.log10(num / den))
