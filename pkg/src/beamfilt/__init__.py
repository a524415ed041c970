"""Causal multi-beam filtering toolkit for multi-channel speech enhancement.

The processing chain is: fixed super-directive beamforming over a uniform
angular grid, per-T-F-bin complex filtering and fusion of the beams, and an
additive complex residual correction.  Analytic oracle weight providers stand
in for a learned estimator at desk scale; external weight tensors can be
plugged in through the NBF1 container format.
"""

__version__ = "0.1.0"

from .stft import StftConfig, MultichannelSpectrogram, analyze, synthesize
from .geometry import ArrayGeometry, Doa, ula, steering_vector
from .sdbeam import (
    FixedBeamformerBank,
    BeamSet,
    diffuse_coherence,
    sd_weights,
    design_bank,
    apply_bank,
    beam_pattern,
    white_noise_gain,
    directivity_index,
)
from .fusion import (
    OracleContext,
    WeightProvider,
    fuse,
    refine,
    oracle_nearest_beam,
    oracle_minnorm_fit,
    oracle_perfect_residual,
    audit_causality,
    run_pipeline,
)
from .room import RoomScenario, rt60_to_reflection, image_method_rir, simulate_mixture
from .metrics import si_sdr, estoi
from .tensorio import read_nbf1, write_nbf1

__all__ = [
    "StftConfig",
    "MultichannelSpectrogram",
    "analyze",
    "synthesize",
    "ArrayGeometry",
    "Doa",
    "ula",
    "steering_vector",
    "FixedBeamformerBank",
    "BeamSet",
    "diffuse_coherence",
    "sd_weights",
    "design_bank",
    "apply_bank",
    "beam_pattern",
    "white_noise_gain",
    "directivity_index",
    "OracleContext",
    "WeightProvider",
    "fuse",
    "refine",
    "oracle_nearest_beam",
    "oracle_minnorm_fit",
    "oracle_perfect_residual",
    "audit_causality",
    "run_pipeline",
    "RoomScenario",
    "rt60_to_reflection",
    "image_method_rir",
    "simulate_mixture",
    "si_sdr",
    "estoi",
    "read_nbf1",
    "write_nbf1",
]
