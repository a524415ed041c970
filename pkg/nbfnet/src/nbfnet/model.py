"""Causal beam-filtering network: ConvGLU encoder/decoder around an S-TCN
bottleneck, an LSTM beam-weight estimator, and a residual-refinement head.

The network maps a real tensor [B, 2(D+1), T, F] (re/im of D beams plus the
reference channel) to complex beam weights G [B, D, T, F] and a complex
residual R [B, T, F].  Every operator is causal along the time axis: 2-tap
time kernels are left-padded, transposed time kernels are cropped at the
tail, and the recurrences are unidirectional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

NUM_BINS = 257
# Frequency sizes traversed by the 6-block (2,3)/(1,2) encoder.
_FREQ_LADDER = (257, 129, 65, 33, 17, 9, 5)


@dataclass(frozen=True)
class NetConfig:
    """Architecture knobs.

    num_beams: D, the beam count of the exported tensors
    width: convolutional channel count (full scale 64, toy scale 16)
    lstm_hidden: weight-estimator LSTM size
    tcn_groups / tcn_blocks: S-TCN layout (3 groups x 6 TCMs, kernel 5,
        dilations 1..32 -> receptive field 253 frames per group)
    input_scale: fixed gain applied to the input features; the predicted
        residual is divided by it so the (G, R) contract stays in the raw
        spectrogram domain.  A constant (rather than data-dependent
        normalization) keeps the forward pass causal.
    """

    num_beams: int = 19
    width: int = 16
    lstm_hidden: int = 64
    tcn_groups: int = 3
    tcn_blocks: int = 6
    tcn_kernel: int = 5
    input_scale: float = 0.05

    @property
    def in_channels(self) -> int:
        return 2 * (self.num_beams + 1)

    def receptive_field_per_group(self) -> int:
        return 1 + (self.tcn_kernel - 1) * sum(
            2 ** k for k in range(self.tcn_blocks)
        )


class ConvGlu(nn.Module):
    """Causal 2-D convolutional gated linear unit: kernel (2,3), stride (1,2)."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, 2 * out_ch, kernel_size=(2, 3),
                              stride=(1, 2), padding=(0, 1))

    def forward(self, x):
        x = nn.functional.pad(x, (0, 0, 1, 0))  # left-pad time
        a, b = self.conv(x).chunk(2, dim=1)
        return a * torch.sigmoid(b)


class DeconvGlu(nn.Module):
    """Causal transposed counterpart: kernel (2,3), stride (1,2)."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.ConvTranspose2d(in_ch, 2 * out_ch, kernel_size=(2, 3),
                                       stride=(1, 2), padding=(0, 1))

    def forward(self, x):
        y = self.conv(x)[:, :, :x.shape[2], :]  # crop the look-ahead frame
        a, b = y.chunk(2, dim=1)
        return a * torch.sigmoid(b)


class Tcm(nn.Module):
    """Temporal convolutional module: squeeze, dilated causal conv, expand,
    residual add."""

    def __init__(self, features: int, hidden: int, kernel: int, dilation: int):
        super().__init__()
        self.squeeze = nn.Conv1d(features, hidden, 1)
        self.dilated = nn.Conv1d(hidden, hidden, kernel, dilation=dilation)
        self.expand = nn.Conv1d(hidden, features, 1)
        self.act1 = nn.PReLU()
        self.act2 = nn.PReLU()
        self.pad = (kernel - 1) * dilation

    def forward(self, x):
        y = self.act1(self.squeeze(x))
        y = nn.functional.pad(y, (self.pad, 0))
        y = self.act2(self.dilated(y))
        return x + self.expand(y)


class Stcn(nn.Module):
    """Stacked groups of dilated TCMs (dilations 1, 2, 4, ... per group)."""

    def __init__(self, features: int, hidden: int, cfg: NetConfig):
        super().__init__()
        self.blocks = nn.ModuleList(
            Tcm(features, hidden, cfg.tcn_kernel, 2 ** k)
            for _ in range(cfg.tcn_groups)
            for k in range(cfg.tcn_blocks)
        )

    def forward(self, x):
        for block in self.blocks:
            x = block(x)
        return x


class ResBlock(nn.Module):
    """Causal residual block, kernel (2,3), stride (1,1)."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, (2, 3), padding=(0, 1))
        self.conv2 = nn.Conv2d(channels, channels, (2, 3), padding=(0, 1))
        self.act1 = nn.PReLU()
        self.act2 = nn.PReLU()

    def forward(self, x):
        y = self.act1(self.conv1(nn.functional.pad(x, (0, 0, 1, 0))))
        y = self.conv2(nn.functional.pad(y, (0, 0, 1, 0)))
        return self.act2(x + y)


class BeamFilterNet(nn.Module):
    """BFM + RRM: estimates per-T-F beam weights and a complex residual."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.width

        channels = [cfg.in_channels] + [w] * 6
        self.encoder = nn.ModuleList(
            ConvGlu(channels[i], channels[i + 1]) for i in range(6)
        )

        features = w * _FREQ_LADDER[-1]
        self.bottleneck = Stcn(features, w, cfg)

        # Mirrored decoders with encoder skip connections (concat); the last
        # block of each path emits 2 channels.
        def decoder():
            blocks = []
            for i in range(6):
                out_ch = 2 if i == 5 else w
                blocks.append(DeconvGlu(2 * w, out_ch))
            return nn.ModuleList(blocks)

        self.bfm_decoder = decoder()
        self.rrm_decoder = decoder()

        feat = 2 * NUM_BINS
        self.weight_norm = nn.LayerNorm(feat)
        self.lstm = nn.LSTM(feat, cfg.lstm_hidden, num_layers=2,
                            batch_first=True)
        self.weight_out = nn.Linear(cfg.lstm_hidden,
                                    2 * cfg.num_beams * NUM_BINS)

        self.rrm_entry = nn.Conv2d(4, w, 1)
        self.rrm_blocks = nn.ModuleList(ResBlock(w) for _ in range(3))
        self.rrm_out = nn.Conv2d(w, 2, 1)

    def _run_decoder(self, blocks, bottleneck_out, skips):
        y = bottleneck_out
        for block, skip in zip(blocks, reversed(skips)):
            y = block(torch.cat([y, skip], dim=1))
        return y

    def forward(self, x: torch.Tensor):
        """x: [B, 2(D+1), T, 257] real -> (G [B, D, T, 257] complex,
        R [B, T, 257] complex)."""
        if x.dim() != 4 or x.shape[1] != self.cfg.in_channels:
            raise ValueError(
                f"expected [B, {self.cfg.in_channels}, T, {NUM_BINS}] input, "
                f"got {tuple(x.shape)}"
            )
        if x.shape[3] != NUM_BINS:
            raise ValueError(f"expected {NUM_BINS} frequency bins")
        b, _, t, f = x.shape
        ref = x[:, -2:]  # reference re/im, [B, 2, T, F]
        x = x * self.cfg.input_scale

        skips = []
        y = x
        for block in self.encoder:
            y = block(y)
            skips.append(y)

        flat = y.permute(0, 1, 3, 2).reshape(b, -1, t)
        flat = self.bottleneck(flat)
        y = flat.reshape(b, self.cfg.width, _FREQ_LADDER[-1], t)
        y = y.permute(0, 1, 3, 2)

        bfm = self._run_decoder(self.bfm_decoder, y, skips)  # [B, 2, T, F]
        feats = bfm.permute(0, 2, 1, 3).reshape(b, t, -1)
        feats = self.weight_norm(feats)
        feats, _ = self.lstm(feats)
        g_flat = self.weight_out(torch.relu(feats))
        g = g_flat.reshape(b, t, 2, self.cfg.num_beams, NUM_BINS)
        g = torch.complex(g[:, :, 0], g[:, :, 1]).permute(0, 2, 1, 3)

        rrm = self._run_decoder(self.rrm_decoder, y, skips)  # [B, 2, T, F]
        rrm = self.rrm_entry(torch.cat([rrm, ref * self.cfg.input_scale], dim=1))
        for block in self.rrm_blocks:
            rrm = block(rrm)
        rrm = self.rrm_out(rrm)
        r = torch.complex(rrm[:, 0], rrm[:, 1]) / self.cfg.input_scale
        return g, r


def pack_input(beams: np.ndarray, reference: np.ndarray) -> torch.Tensor:
    """Stack complex beams [D, T, F] and reference [T, F] into the network's
    real input layout [1, 2(D+1), T, F]."""
    beams = np.asarray(beams)
    reference = np.asarray(reference)
    if beams.ndim != 3 or reference.shape != beams.shape[1:]:
        raise ValueError("beams must be (D, T, F) with matching reference")
    stacked = np.concatenate([beams, reference[None]], axis=0)
    ri = np.stack([stacked.real, stacked.imag], axis=1)  # [D+1, 2, T, F]
    ri = ri.reshape(-1, *stacked.shape[1:])
    return torch.from_numpy(np.ascontiguousarray(ri, dtype=np.float32))[None]


def fusion_loss(g: torch.Tensor, r: torch.Tensor, beams: torch.Tensor,
                clean: torch.Tensor) -> torch.Tensor:
    """0.5 * complex-spectrum MSE + 0.5 * magnitude MSE of the fused and
    refined estimate against the clean reference."""
    est = torch.sum(g * beams, dim=1) + r
    complex_mse = torch.mean(torch.abs(est - clean) ** 2)
    mag_mse = torch.mean((torch.abs(est) - torch.abs(clean)) ** 2)
    return 0.5 * complex_mse + 0.5 * mag_mse
