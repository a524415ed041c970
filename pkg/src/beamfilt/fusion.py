"""Per-bin complex beam filtering, fusion, and residual refinement, plus the
weight-provider contract and its analytic oracle implementations."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .geometry import Doa
from .sdbeam import BeamSet, FixedBeamformerBank, apply_bank
from .stft import MultichannelSpectrogram, synthesize

DEFAULT_MINNORM_DELTA = 1e-8


def fuse(beams: BeamSet | np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Fused spectrogram: sum_d G_d(t, f) * B_d(t, f), complex per bin."""
    b = beams.beams if isinstance(beams, BeamSet) else np.asarray(beams)
    g = np.asarray(weights)
    if g.shape != b.shape:
        raise ValueError(f"weight dims {g.shape} do not match beams {b.shape}")
    return np.einsum("dtf,dtf->tf", g, b)


def refine(fused: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Refined spectrogram: element-wise complex addition of the residual."""
    fused = np.asarray(fused)
    residual = np.asarray(residual)
    if residual.shape != fused.shape:
        raise ValueError(
            f"residual dims {residual.shape} do not match fused {fused.shape}"
        )
    return fused + residual


class WeightProvider(abc.ABC):
    """Maps (BeamSet, reference spectrogram) to (beam weights, residual).

    Implementations declare via ``causal`` whether outputs at frame t depend
    only on inputs at frames <= t.
    """

    causal: bool = True

    @abc.abstractmethod
    def produce(
        self, beams: BeamSet, reference: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (G, R) with G shaped (D, T, F) and R shaped (T, F)."""


@dataclass(eq=False)
class OracleContext:
    """Ground-truth scene information consumed by the analytic oracles.

    clean: direct-path target spectrogram at the reference mic, shape (T, F)
    target_doa: true target direction
    delta: regularizer, relative to the mean beam power
    """

    clean: np.ndarray
    target_doa: Doa | None = None
    delta: float = DEFAULT_MINNORM_DELTA

    def __post_init__(self):
        self.clean = np.asarray(self.clean, dtype=np.complex128)
        if self.clean.ndim != 2:
            raise ValueError("clean spectrogram must be (T, F)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


class NearestBeamProvider(WeightProvider):
    """Selects the single beam whose look angle is nearest the true DOA.

    Ties break toward the lower beam index; the residual is zero.
    """

    causal = True

    def __init__(self, ctx: OracleContext, bank: FixedBeamformerBank):
        if ctx.target_doa is None:
            raise ValueError("nearest-beam oracle needs the true target DOA")
        looks = np.array([look.azimuth_deg for look in bank.look_angles])
        self.beam_index = int(np.argmin(np.abs(looks - ctx.target_doa.azimuth_deg)))
        self._ctx = ctx

    def produce(self, beams, reference):
        d, t, f = beams.beams.shape
        g = np.zeros((d, t, f), dtype=np.complex128)
        g[self.beam_index] = 1.0
        return g, np.zeros((t, f), dtype=np.complex128)


class MinNormFitProvider(WeightProvider):
    """Per-bin minimum-norm least-squares fit of the beams to the clean target.

    G(t, f) = conj(B(t, f)) X(t, f) / (||B(t, f)||^2 + delta) solves the
    underdetermined 1 x D system G . B = X with minimum norm; frame-local,
    hence causal.  The residual is zero.
    """

    causal = True

    def __init__(self, ctx: OracleContext):
        self._ctx = ctx

    def produce(self, beams, reference):
        b = beams.beams
        x = self._ctx.clean
        if x.shape != b.shape[1:]:
            raise ValueError("clean spectrogram dims do not match beams")
        power = np.sum(np.abs(b) ** 2, axis=0)
        delta = self._ctx.delta * max(power.mean(), np.finfo(float).tiny)
        g = b.conj() * x[None] / (power + delta)[None]
        return g, np.zeros_like(x)


class PerfectResidualProvider(WeightProvider):
    """Wraps a provider and replaces its residual with X - fuse(B, G), so the
    refined output equals the clean reference exactly."""

    def __init__(self, ctx: OracleContext, inner: WeightProvider):
        self._ctx = ctx
        self._inner = inner
        self.causal = inner.causal

    def produce(self, beams, reference):
        g, _ = self._inner.produce(beams, reference)
        x = self._ctx.clean
        if x.shape != beams.beams.shape[1:]:
            raise ValueError("clean spectrogram dims do not match beams")
        return g, x - fuse(beams, g)


class ZeroProvider(WeightProvider):
    """All-zero weights and residual; the pipeline outputs silence."""

    causal = True

    def produce(self, beams, reference):
        d, t, f = beams.beams.shape
        return (
            np.zeros((d, t, f), dtype=np.complex128),
            np.zeros((t, f), dtype=np.complex128),
        )


class ExternalTensorProvider(WeightProvider):
    """Serves precomputed (G, R) tensors, e.g. from a neural estimator."""

    def __init__(self, g: np.ndarray, r: np.ndarray, causal: bool = True):
        self.g = np.asarray(g, dtype=np.complex128)
        self.r = np.asarray(r, dtype=np.complex128)
        self.causal = causal

    def produce(self, beams, reference):
        if self.g.shape != beams.beams.shape:
            raise ValueError(
                f"external weights {self.g.shape} do not match beams "
                f"{beams.beams.shape}"
            )
        if self.r.shape != beams.beams.shape[1:]:
            raise ValueError("external residual dims do not match beams")
        return self.g, self.r


def oracle_nearest_beam(ctx: OracleContext, bank: FixedBeamformerBank) -> WeightProvider:
    return NearestBeamProvider(ctx, bank)


def oracle_minnorm_fit(ctx: OracleContext) -> WeightProvider:
    return MinNormFitProvider(ctx)


def oracle_perfect_residual(ctx: OracleContext, inner: WeightProvider) -> WeightProvider:
    return PerfectResidualProvider(ctx, inner)


def audit_causality(
    provider: WeightProvider, beams: BeamSet, reference: np.ndarray, t0: int
) -> float:
    """Empirical causality check: zero every input frame after t0 and measure
    the largest relative change in the provider outputs at frames <= t0."""
    g_full, r_full = provider.produce(beams, reference)
    cut = beams.beams.copy()
    cut[:, t0 + 1:, :] = 0
    ref_cut = np.asarray(reference).copy()
    ref_cut[t0 + 1:, :] = 0
    g_cut, r_cut = provider.produce(BeamSet(cut, beams.bank), ref_cut)
    scale = max(
        np.max(np.abs(g_full[:, :t0 + 1])), np.max(np.abs(r_full[:t0 + 1])), 1e-30
    )
    dev = max(
        np.max(np.abs(g_full[:, :t0 + 1] - g_cut[:, :t0 + 1])),
        np.max(np.abs(r_full[:t0 + 1] - r_cut[:t0 + 1])),
    )
    return float(dev / scale)


def run_pipeline(
    spec: MultichannelSpectrogram,
    bank: FixedBeamformerBank,
    provider: WeightProvider,
    reference_channel: int = 0,
) -> np.ndarray:
    """Full enhancement chain: beamform, filter-and-fuse, refine, synthesize.

    Returns the enhanced single-channel waveform.
    """
    beams = apply_bank(bank, spec)
    reference = spec.channel(reference_channel)
    g, r = provider.produce(beams, reference)
    enhanced = refine(fuse(beams, g), r)
    mono = MultichannelSpectrogram(
        enhanced[None], spec.config, num_samples=spec.num_samples
    )
    return synthesize(mono)[0]
