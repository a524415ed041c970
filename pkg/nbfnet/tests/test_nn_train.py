"""Training loop tests on a tiny synthetic export dataset: dataset loading,
checkpointing, divergence handling, and tensor emission."""

import json
import os

import numpy as np
import pytest
import torch

from nbfnet.cli import main as cli_main
from nbfnet.model import NUM_BINS, NetConfig
from nbfnet.nbf1 import read_nbf1, write_nbf1
from nbfnet.train import (
    DivergenceError,
    TrainConfig,
    emit_tensors,
    load_checkpoint,
    load_export,
    train_toy,
)

SMALL = NetConfig(num_beams=2, width=4, lstm_hidden=8)
FAST = TrainConfig(steps=3, seed=1)


def make_export(root, num_beams=2, frames=(6, 8, 7), seed=0, clean_fill=None):
    """Write a synthetic export dataset: per-utterance beams [D, T, 257],
    reference [T, 257] and clean [T, 257] tensors plus the manifest."""
    rng = np.random.default_rng(seed)
    os.makedirs(root, exist_ok=True)
    items = []
    for i, t in enumerate(frames):
        beams = (rng.standard_normal((num_beams, t, NUM_BINS))
                 + 1j * rng.standard_normal((num_beams, t, NUM_BINS)))
        ref = beams.mean(axis=0)
        clean = 0.5 * beams[0]
        if clean_fill is not None:
            clean = np.full_like(clean, clean_fill)
        utt = f"utt{i:03d}"
        write_nbf1(os.path.join(root, f"{utt}.beams.nbf"), beams)
        write_nbf1(os.path.join(root, f"{utt}.ref.nbf"), ref)
        write_nbf1(os.path.join(root, f"{utt}.clean.nbf"), clean)
        items.append({"id": utt, "beams_nbf": f"{utt}.beams.nbf",
                      "ref_nbf": f"{utt}.ref.nbf",
                      "clean_nbf": f"{utt}.clean.nbf", "num_frames": t})
    with open(os.path.join(root, "export_manifest.json"), "w") as fh:
        json.dump({"num_beams": num_beams, "num_bins": NUM_BINS,
                   "sample_rate_hz": 16000, "items": items}, fh)
    return str(root)


class TestLoadExport:
    def test_shapes_and_order(self, tmp_path):
        export = make_export(tmp_path / "exp")
        num_beams, items = load_export(export)
        assert num_beams == 2
        assert [utt for utt, *_ in items] == ["utt000", "utt001", "utt002"]
        for _, beams, ref, clean in items:
            assert beams.shape[0] == 2 and beams.shape[2] == NUM_BINS
            assert ref.shape == beams.shape[1:]
            assert clean.shape == beams.shape[1:]


class TestTrainToy:
    def test_writes_checkpoint_and_log(self, tmp_path):
        export = make_export(tmp_path / "exp")
        out = tmp_path / "run"
        model, log = train_toy(export, out, SMALL, FAST)
        assert (out / "checkpoint.pt").exists()
        disk_log = json.loads((out / "training_log.json").read_text())
        assert disk_log == log
        assert log["net_config"]["num_beams"] == 2
        assert log["train_config"]["learning_rate"] == 5e-4
        entries = log["entries"]
        assert entries[0]["step"] == 0
        assert entries[-1]["step"] == FAST.steps - 1
        assert all(np.isfinite(e["loss"]) and e["lr"] > 0 for e in entries)

    def test_seeded_runs_identical(self, tmp_path):
        export = make_export(tmp_path / "exp")
        _, log_a = train_toy(export, tmp_path / "a", SMALL, FAST)
        _, log_b = train_toy(export, tmp_path / "b", SMALL, FAST)
        assert log_a["entries"] == log_b["entries"]

    def test_beam_count_mismatch(self, tmp_path):
        export = make_export(tmp_path / "exp", num_beams=3)
        with pytest.raises(ValueError, match="D=2"):
            train_toy(export, tmp_path / "run", SMALL, FAST)

    def test_divergence_aborts_with_diagnostics(self, tmp_path):
        export = make_export(tmp_path / "exp", clean_fill=np.inf)
        with pytest.raises(DivergenceError, match="non-finite loss at step"):
            train_toy(export, tmp_path / "run", SMALL, FAST)

    def test_empty_dataset(self, tmp_path):
        export = make_export(tmp_path / "exp", frames=())
        with pytest.raises(ValueError, match="empty"):
            train_toy(export, tmp_path / "run", SMALL, FAST)


class TestCheckpoint:
    def test_round_trip_reproduces_outputs(self, tmp_path):
        export = make_export(tmp_path / "exp")
        model, _ = train_toy(export, tmp_path / "run", SMALL, FAST)
        model.eval()
        restored = load_checkpoint(tmp_path / "run" / "checkpoint.pt")
        assert restored.cfg == SMALL
        x = torch.randn(1, SMALL.in_channels, 5, NUM_BINS)
        with torch.no_grad():
            g0, r0 = model(x)
            g1, r1 = restored(x)
        assert torch.equal(g0, g1) and torch.equal(r0, r1)


class TestEmit:
    def test_writes_g_and_r_per_utterance(self, tmp_path):
        export = make_export(tmp_path / "exp")
        model, _ = train_toy(export, tmp_path / "run", SMALL, FAST)
        out = tmp_path / "tensors"
        written = emit_tensors(model, export, out)
        assert written == ["utt000", "utt001", "utt002"]
        _, items = load_export(export)
        for utt, beams, _, _ in items:
            g = read_nbf1(out / f"{utt}.G.nbf")
            r = read_nbf1(out / f"{utt}.R.nbf")
            assert g.shape == beams.shape
            assert r.shape == beams.shape[1:]
            assert np.isfinite(g).all() and np.isfinite(r).all()

    def test_beam_count_mismatch(self, tmp_path):
        export = make_export(tmp_path / "exp")
        model, _ = train_toy(export, tmp_path / "run", SMALL, FAST)
        other = make_export(tmp_path / "other", num_beams=4)
        with pytest.raises(ValueError, match="D=2"):
            emit_tensors(model, other, tmp_path / "tensors")


class TestCli:
    def test_train_then_emit(self, tmp_path, capsys):
        export = make_export(tmp_path / "exp")
        rc = cli_main(["train", "--export-dir", export,
                       "--out", str(tmp_path / "run"),
                       "--steps", "2", "--width", "4"])
        assert rc == 0
        assert "trained 2 steps" in capsys.readouterr().out
        rc = cli_main(["emit", "--export-dir", export,
                       "--checkpoint", str(tmp_path / "run" / "checkpoint.pt"),
                       "--out", str(tmp_path / "tensors")])
        assert rc == 0
        assert (tmp_path / "tensors" / "utt000.G.nbf").exists()

    def test_missing_dataset_fails_cleanly(self, tmp_path, capsys):
        rc = cli_main(["train", "--export-dir", str(tmp_path / "nope"),
                       "--out", str(tmp_path / "run")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
