"""Unit tests for the beam-filtering network: shapes, causal structure,
input packing, and the fusion loss."""

import numpy as np
import pytest
import torch

from nbfnet.model import (
    NUM_BINS,
    BeamFilterNet,
    NetConfig,
    fusion_loss,
    pack_input,
)

SMALL = NetConfig(num_beams=3, width=4, lstm_hidden=8)


def _rand_input(cfg, batch, frames, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, cfg.in_channels, frames, NUM_BINS))
    return torch.from_numpy(x.astype(np.float32))


class TestShapes:
    def test_forward_shapes(self):
        model = BeamFilterNet(SMALL).eval()
        with torch.no_grad():
            g, r = model(_rand_input(SMALL, 2, 7))
        assert g.shape == (2, 3, 7, NUM_BINS)
        assert r.shape == (2, 7, NUM_BINS)
        assert g.dtype == torch.complex64
        assert r.dtype == torch.complex64

    def test_single_frame(self):
        model = BeamFilterNet(SMALL).eval()
        with torch.no_grad():
            g, r = model(_rand_input(SMALL, 1, 1))
        assert g.shape == (1, 3, 1, NUM_BINS)
        assert r.shape == (1, 1, NUM_BINS)

    def test_zero_input_is_finite(self):
        model = BeamFilterNet(SMALL).eval()
        x = torch.zeros(1, SMALL.in_channels, 4, NUM_BINS)
        with torch.no_grad():
            g, r = model(x)
        assert torch.isfinite(g.real).all() and torch.isfinite(g.imag).all()
        assert torch.isfinite(r.real).all() and torch.isfinite(r.imag).all()

    def test_rejects_wrong_channel_count(self):
        model = BeamFilterNet(SMALL)
        with pytest.raises(ValueError, match="expected"):
            model(torch.zeros(1, SMALL.in_channels + 2, 4, NUM_BINS))

    def test_rejects_wrong_bin_count(self):
        model = BeamFilterNet(SMALL)
        with pytest.raises(ValueError, match="frequency bins"):
            model(torch.zeros(1, SMALL.in_channels, 4, 128))

    def test_rejects_missing_batch_dim(self):
        model = BeamFilterNet(SMALL)
        with pytest.raises(ValueError):
            model(torch.zeros(SMALL.in_channels, 4, NUM_BINS))


class TestConfig:
    def test_in_channels(self):
        assert NetConfig(num_beams=19).in_channels == 40
        assert NetConfig(num_beams=10).in_channels == 22

    def test_receptive_field_per_group(self):
        # kernel 5, dilations 1..32: 1 + 4 * 63 = 253 frames
        assert NetConfig().receptive_field_per_group() == 253

    def test_parameter_count_frozen(self):
        # Regression pin for the toy scale (D=19, width 16).
        model = BeamFilterNet(NetConfig())
        assert sum(p.numel() for p in model.parameters()) == 984718

    def test_parameter_count_independent_of_frames(self):
        """Fully convolutional / recurrent along time: the same weights
        serve any utterance length."""
        model = BeamFilterNet(SMALL).eval()
        n_params = sum(p.numel() for p in model.parameters())
        with torch.no_grad():
            for frames in (1, 5, 40):
                model(_rand_input(SMALL, 1, frames))
        assert sum(p.numel() for p in model.parameters()) == n_params


class TestPackInput:
    def test_layout(self):
        """Channel order is re/im interleaved per source: beam 0 re, beam 0
        im, ..., reference re, reference im."""
        rng = np.random.default_rng(3)
        beams = (rng.standard_normal((2, 4, NUM_BINS))
                 + 1j * rng.standard_normal((2, 4, NUM_BINS)))
        ref = (rng.standard_normal((4, NUM_BINS))
               + 1j * rng.standard_normal((4, NUM_BINS)))
        x = pack_input(beams, ref).numpy()
        assert x.shape == (1, 6, 4, NUM_BINS)
        np.testing.assert_allclose(x[0, 0], beams[0].real, rtol=1e-6)
        np.testing.assert_allclose(x[0, 1], beams[0].imag, rtol=1e-6)
        np.testing.assert_allclose(x[0, 2], beams[1].real, rtol=1e-6)
        np.testing.assert_allclose(x[0, 3], beams[1].imag, rtol=1e-6)
        np.testing.assert_allclose(x[0, 4], ref.real, rtol=1e-6)
        np.testing.assert_allclose(x[0, 5], ref.imag, rtol=1e-6)

    def test_rejects_mismatched_reference(self):
        beams = np.zeros((2, 4, NUM_BINS), dtype=np.complex64)
        with pytest.raises(ValueError, match="matching reference"):
            pack_input(beams, np.zeros((5, NUM_BINS), dtype=np.complex64))


class TestFusionLoss:
    def test_matches_numpy_oracle(self):
        rng = np.random.default_rng(11)
        shape = (2, 3, 5, 17)
        g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        beams = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        r = (rng.standard_normal(shape[0:1] + shape[2:])
             + 1j * rng.standard_normal(shape[0:1] + shape[2:]))
        clean = (rng.standard_normal(r.shape)
                 + 1j * rng.standard_normal(r.shape))

        est = np.sum(g * beams, axis=1) + r
        expected = 0.5 * np.mean(np.abs(est - clean) ** 2) \
            + 0.5 * np.mean((np.abs(est) - np.abs(clean)) ** 2)

        loss = fusion_loss(
            torch.from_numpy(g), torch.from_numpy(r),
            torch.from_numpy(beams), torch.from_numpy(clean),
        )
        np.testing.assert_allclose(loss.item(), expected, rtol=1e-10)

    def test_zero_at_exact_reconstruction(self):
        rng = np.random.default_rng(12)
        clean = (rng.standard_normal((1, 4, 9))
                 + 1j * rng.standard_normal((1, 4, 9)))
        g = torch.zeros(1, 2, 4, 9, dtype=torch.complex128)
        beams = torch.zeros(1, 2, 4, 9, dtype=torch.complex128)
        loss = fusion_loss(g, torch.from_numpy(clean), beams,
                           torch.from_numpy(clean))
        assert loss.item() == 0.0

    def test_gradients_match_finite_differences(self):
        """Analytic gradients of the loss agree with central finite
        differences on sampled coordinates (micro-batch, float64)."""
        rng = np.random.default_rng(7)
        shape = (1, 2, 3, 5)
        beams = torch.from_numpy(
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
        clean = torch.from_numpy(
            rng.standard_normal(shape[0:1] + shape[2:])
            + 1j * rng.standard_normal(shape[0:1] + shape[2:])
        )
        g_ri = torch.from_numpy(
            rng.standard_normal((2,) + shape)
        ).requires_grad_(True)
        r_ri = torch.from_numpy(
            rng.standard_normal((2,) + shape[0:1] + shape[2:])
        ).requires_grad_(True)

        def evaluate(g_ri, r_ri):
            g = torch.complex(g_ri[0], g_ri[1])
            r = torch.complex(r_ri[0], r_ri[1])
            return fusion_loss(g, r, beams, clean)

        loss = evaluate(g_ri, r_ri)
        loss.backward()

        eps = 1e-6
        for tensor in (g_ri, r_ri):
            flat = tensor.detach().reshape(-1)
            grad = tensor.grad.reshape(-1)
            for idx in rng.choice(flat.numel(), size=8, replace=False):
                orig = flat[idx].item()
                flat[idx] = orig + eps
                hi = evaluate(g_ri.detach(), r_ri.detach()).item()
                flat[idx] = orig - eps
                lo = evaluate(g_ri.detach(), r_ri.detach()).item()
                flat[idx] = orig
                numeric = (hi - lo) / (2 * eps)
                assert abs(grad[idx].item() - numeric) <= 1e-3 * max(
                    1.0, abs(numeric)
                )
