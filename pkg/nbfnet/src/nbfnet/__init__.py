"""Causal neural estimator of beam-fusion weights and residuals.

Consumes beam/reference/clean tensors exported by the beamfilt toolkit
(NBF1 containers plus a JSON manifest) and produces (G, R) tensors for its
external_tensor provider.
"""

__version__ = "0.1.0"

from .model import BeamFilterNet, NetConfig, fusion_loss, pack_input
from .nbf1 import Nbf1FormatError, read_nbf1, write_nbf1
from .train import (
    DivergenceError,
    TrainConfig,
    emit_tensors,
    load_checkpoint,
    load_export,
    train_toy,
)

__all__ = [
    "BeamFilterNet",
    "NetConfig",
    "fusion_loss",
    "pack_input",
    "Nbf1FormatError",
    "read_nbf1",
    "write_nbf1",
    "DivergenceError",
    "TrainConfig",
    "emit_tensors",
    "load_checkpoint",
    "load_export",
    "train_toy",
]
