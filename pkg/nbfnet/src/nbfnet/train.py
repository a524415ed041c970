"""Toy-scale training over beam tensors exported by the beamfilt CLI, and
emission of (G, R) tensors for its external_tensor provider."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .model import BeamFilterNet, NetConfig, fusion_loss, pack_input
from .nbf1 import write_nbf1, read_nbf1


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer schedule: Adam at 5e-4, halved after 2 plateau epochs."""

    learning_rate: float = 5e-4
    plateau_patience: int = 2
    plateau_factor: float = 0.5
    steps: int = 500
    seed: int = 0
    # Loss/target decisions, recorded in the training-log header:
    loss: str = "0.5*complex_mse + 0.5*magnitude_mse"
    target: str = "direct-path clean at the reference mic"


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


def load_export(export_dir):
    """Load an export_manifest.json dataset into memory.

    Returns (num_beams, items) with items = [(utt_id, beams, ref, clean)].
    """
    with open(os.path.join(export_dir, "export_manifest.json")) as fh:
        manifest = json.load(fh)
    items = []
    for entry in manifest["items"]:
        beams = read_nbf1(os.path.join(export_dir, entry["beams_nbf"]))
        ref = read_nbf1(os.path.join(export_dir, entry["ref_nbf"]))
        clean = read_nbf1(os.path.join(export_dir, entry["clean_nbf"]))
        items.append((entry["id"], beams, ref, clean))
    return int(manifest["num_beams"]), items


def _to_batch(items):
    """Tensors for a single batch: input, beams, clean.

    Utterances are cropped to the shortest frame count in the set so they
    stack; the crop drops trailing frames only, which is safe for a causal
    model.
    """
    t_min = min(b.shape[1] for _, b, _, _ in items)
    xs = torch.cat(
        [pack_input(b[:, :t_min], r[:t_min]) for _, b, r, _ in items]
    )
    beams = torch.stack([
        torch.from_numpy(np.ascontiguousarray(b[:, :t_min], dtype=np.complex64))
        for _, b, _, _ in items
    ])
    clean = torch.stack([
        torch.from_numpy(np.ascontiguousarray(c[:t_min], dtype=np.complex64))
        for _, _, _, c in items
    ])
    return xs, beams, clean


def train_toy(export_dir, out_dir, net_cfg: NetConfig | None = None,
              train_cfg: TrainConfig | None = None, log_every: int = 10):
    """Overfit the exported utterances; writes checkpoint + training log.

    Returns (model, log) where log["entries"] is a list of
    {step, loss, lr} records.
    """
    train_cfg = train_cfg or TrainConfig()
    num_beams, items = load_export(export_dir)
    if len(items) < 1:
        raise ValueError("empty export dataset")
    if net_cfg is None:
        net_cfg = NetConfig(num_beams=num_beams)
    elif net_cfg.num_beams != num_beams:
        raise ValueError(
            f"model expects D={net_cfg.num_beams}, dataset has D={num_beams}"
        )

    torch.manual_seed(train_cfg.seed)
    model = BeamFilterNet(net_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)
    # One "epoch" is one pass over the toy batch, i.e. one step here.
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=train_cfg.plateau_factor,
        patience=train_cfg.plateau_patience,
    )

    xs, beams, clean = _to_batch(items)
    log = {
        "net_config": asdict(net_cfg),
        "train_config": asdict(train_cfg),
        "entries": [],
    }
    for step in range(train_cfg.steps):
        optimizer.zero_grad()
        g, r = model(xs)
        loss = fusion_loss(g, r, beams, clean)
        if not torch.isfinite(loss):
            raise DivergenceError(
                f"non-finite loss at step {step}; "
                f"last lr {optimizer.param_groups[0]['lr']:g}"
            )
        loss.backward()
        optimizer.step()
        scheduler.step(loss.item())
        if step % log_every == 0 or step == train_cfg.steps - 1:
            log["entries"].append({
                "step": step,
                "loss": float(loss.item()),
                "lr": float(optimizer.param_groups[0]["lr"]),
            })

    os.makedirs(out_dir, exist_ok=True)
    torch.save(
        {"net_config": asdict(net_cfg), "state_dict": model.state_dict()},
        os.path.join(out_dir, "checkpoint.pt"),
    )
    with open(os.path.join(out_dir, "training_log.json"), "w") as fh:
        json.dump(log, fh, indent=2)
    return model, log


def load_checkpoint(path) -> BeamFilterNet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = BeamFilterNet(NetConfig(**payload["net_config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def emit_tensors(model: BeamFilterNet, export_dir, out_dir):
    """Run the model over an exported dataset and write {utt}.G.nbf and
    {utt}.R.nbf for the beamfilt external_tensor provider."""
    num_beams, items = load_export(export_dir)
    if num_beams != model.cfg.num_beams:
        raise ValueError(
            f"model expects D={model.cfg.num_beams}, dataset has D={num_beams}"
        )
    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    written = []
    with torch.no_grad():
        for utt_id, beams, ref, _ in items:
            g, r = model(pack_input(beams, ref))
            write_nbf1(os.path.join(out_dir, f"{utt_id}.G.nbf"),
                       g[0].numpy().astype(np.complex64))
            write_nbf1(os.path.join(out_dir, f"{utt_id}.R.nbf"),
                       r[0].numpy().astype(np.complex64))
            written.append(utt_id)
    return written
