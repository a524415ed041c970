"""Command-line surface: dataset generation, enhancement, evaluation, and
tensor import/export.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .experiment import (
    ConfigError,
    ExperimentConfig,
    atomic_write_json,
    load_manifest,
    sample_scenarios,
    scenario_from_dict,
    scenario_to_dict,
    sha256_file,
)
from .fusion import (
    ExternalTensorProvider,
    OracleContext,
    oracle_minnorm_fit,
    oracle_nearest_beam,
    oracle_perfect_residual,
    run_pipeline,
)
from .geometry import ArrayGeometry
from .metrics import estoi, si_sdr
from .sdbeam import FixedBeamformerBank, apply_bank, design_bank, uniform_look_angles
from .stft import MultichannelSpectrogram, analyze
from .tensorio import Nbf1FormatError, read_nbf1, write_nbf1
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _default_out(args) -> str:
    if args.out:
        return args.out
    return os.environ.get("NBF_DATA_DIR", ".")


def _load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    if getattr(args, "beams", None):
        config = ExperimentConfig.from_dict(
            {**config.to_dict(), "num_beams": args.beams}
        )
    if getattr(args, "provider", None):
        config = ExperimentConfig.from_dict(
            {**config.to_dict(), "provider": args.provider}
        )
    return config


def _bank_meta_path(bank_path: str) -> str:
    return os.path.splitext(bank_path)[0] + ".json"


def save_bank(bank: FixedBeamformerBank, path: str) -> None:
    write_nbf1(path, bank.weights)
    atomic_write_json(_bank_meta_path(path), {
        "look_angles_deg": [l.azimuth_deg for l in bank.look_angles],
        "diag_loading": bank.diag_loading,
        "mic_positions": bank.geometry.mic_positions.tolist(),
        "stft": {
            "sample_rate_hz": bank.config.sample_rate_hz,
            "frame_len_samples": bank.config.frame_len_samples,
            "hop_samples": bank.config.hop_samples,
            "fft_size": bank.config.fft_size,
        },
    })


def load_bank(path: str) -> FixedBeamformerBank:
    from .geometry import Doa
    from .stft import StftConfig

    weights = read_nbf1(path).astype(np.complex128)
    with open(_bank_meta_path(path)) as fh:
        meta = json.load(fh)
    return FixedBeamformerBank(
        weights,
        [Doa(a) for a in meta["look_angles_deg"]],
        meta["diag_loading"],
        ArrayGeometry(np.asarray(meta["mic_positions"])),
        StftConfig(**meta["stft"]),
    )


def cmd_design(args) -> int:
    config = _load_config(args)
    out_dir = _default_out(args)
    os.makedirs(out_dir, exist_ok=True)
    bank = design_bank(
        config.geometry(), config.num_beams, config.diag_loading, config.stft
    )
    path = os.path.join(out_dir, f"bank_d{config.num_beams}.nbf")
    save_bank(bank, path)
    print(f"wrote {path}: beams={bank.num_beams} bins={config.stft.num_bins} "
          f"mics={bank.num_mics}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load_config(args)
    seed = args.seed if args.seed is not None else config.seed
    out_dir = _default_out(args)
    for sub in ("scenarios", "wavs"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    items = sample_scenarios(config, args.count, seed)

    def render(entry):
        utt_id, scenario = entry
        from .room import simulate_mixture

        rendered = simulate_mixture(scenario)
        fs = scenario.sample_rate_hz
        paths = {}
        for kind, key in (
            ("mixture", "mixture_wav"),
            ("target_direct", "target_direct_wav"),
            ("target_reverb", "target_reverb_wav"),
        ):
            rel = os.path.join("wavs", f"{utt_id}_{kind}.wav")
            write_wav(os.path.join(out_dir, rel), fs, rendered[kind])
            paths[key] = rel
        for kind, sig in (
            ("target_dry", scenario.target_signal),
            ("intf_dry", scenario.interference_signal),
        ):
            rel = os.path.join("wavs", f"{utt_id}_{kind}.wav")
            write_wav(os.path.join(out_dir, rel), fs, sig[None, :])
            paths[kind] = rel
        scenario_rel = os.path.join("scenarios", f"{utt_id}.json")
        atomic_write_json(
            os.path.join(out_dir, scenario_rel),
            scenario_to_dict(scenario, paths["target_dry"], paths["intf_dry"]),
        )
        item = {
            "id": utt_id,
            "scenario_json": scenario_rel,
            "mixture_wav": paths["mixture_wav"],
            "target_direct_wav": paths["target_direct_wav"],
            "target_reverb_wav": paths["target_reverb_wav"],
            "sir_db": scenario.sir_db,
            "condition": f"sir_{scenario.sir_db:+g}dB",
        }
        for key in ("mixture_wav", "target_direct_wav", "target_reverb_wav"):
            item[f"{key}_sha256"] = sha256_file(os.path.join(out_dir, item[key]))
        return item

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        manifest_items = list(pool.map(render, items))

    manifest = {"seed": seed, "config": config.to_dict(), "items": manifest_items}
    atomic_write_json(os.path.join(out_dir, "manifest.json"), manifest)
    print(f"wrote {len(manifest_items)} utterances to {out_dir}")
    return EXIT_OK


def _provider_for(config, provider_name, scenario, bank, clean_spec, utt_id,
                  tensor_dir):
    ctx = OracleContext(clean_spec, scenario.target_doa())
    if provider_name == "nearest_beam":
        return oracle_nearest_beam(ctx, bank)
    if provider_name == "minnorm":
        return oracle_minnorm_fit(ctx)
    if provider_name == "perfect_residual":
        return oracle_perfect_residual(ctx, oracle_nearest_beam(ctx, bank))
    if provider_name == "external_tensor":
        if not tensor_dir:
            raise ConfigError("external_tensor provider needs --tensors")
        g = read_nbf1(os.path.join(tensor_dir, f"{utt_id}.G.nbf"))
        r = read_nbf1(os.path.join(tensor_dir, f"{utt_id}.R.nbf"))
        return ExternalTensorProvider(g, r)
    raise ConfigError(f"unknown provider {provider_name!r}")


def cmd_enhance(args) -> int:
    config = _load_config(args)
    out_dir = _default_out(args)
    os.makedirs(os.path.join(out_dir, "enhanced"), exist_ok=True)
    manifest = load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    if args.bank:
        bank = load_bank(args.bank)
    else:
        bank = design_bank(
            config.geometry(), config.num_beams, config.diag_loading, config.stft
        )
    provider_name = args.provider or config.provider

    def enhance(item):
        with open(os.path.join(base, item["scenario_json"])) as fh:
            scenario = scenario_from_dict(json.load(fh), base)
        fs, mixture = read_wav(os.path.join(base, item["mixture_wav"]))
        _, clean = read_wav(os.path.join(base, item["target_direct_wav"]))
        spec = analyze(mixture, config.stft)
        clean_spec = analyze(
            clean[config.reference_channel], config.stft
        ).channel(0)
        provider = _provider_for(
            config, provider_name, scenario, bank, clean_spec, item["id"],
            args.tensors,
        )
        enhanced = run_pipeline(spec, bank, provider, config.reference_channel)
        rel = os.path.join("enhanced", f"{item['id']}.wav")
        write_wav(os.path.join(out_dir, rel), fs, enhanced[None, :])
        return {**item, "enhanced_wav": rel,
                "enhanced_wav_sha256": sha256_file(os.path.join(out_dir, rel))}

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        items = list(pool.map(enhance, manifest["items"]))

    out_manifest = {
        "source_manifest": os.path.abspath(args.manifest),
        "provider": provider_name,
        "num_beams": bank.num_beams,
        "items": items,
    }
    atomic_write_json(os.path.join(out_dir, "enhanced_manifest.json"), out_manifest)
    print(f"enhanced {len(items)} utterances with provider={provider_name}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args)
    out_dir = _default_out(args)
    os.makedirs(out_dir, exist_ok=True)
    manifest = load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    src_base = os.path.dirname(manifest.get("source_manifest", args.manifest))

    def score(item):
        fs, enhanced = read_wav(os.path.join(base, item["enhanced_wav"]))
        _, clean = read_wav(os.path.join(src_base, item["target_direct_wav"]))
        ref = clean[config.reference_channel]
        est = enhanced[0]
        n = min(len(ref), len(est))
        return {
            "utterance": item["id"],
            "condition": item["condition"],
            "si_sdr_db": si_sdr(est[:n], ref[:n]),
            "estoi": estoi(est[:n], ref[:n], fs),
        }

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(score, manifest["items"]))

    csv_path = os.path.join(out_dir, "report.csv")
    tmp = csv_path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance", "condition", "si_sdr_db", "estoi"])
        for row in rows:
            writer.writerow([
                row["utterance"], row["condition"],
                f"{row['si_sdr_db']:.6f}", f"{row['estoi']:.6f}",
            ])
    os.replace(tmp, csv_path)

    aggregate: dict = {}
    for row in rows:
        aggregate.setdefault(row["condition"], []).append(row)
    summary = {
        cond: {
            "count": len(group),
            "mean_si_sdr_db": float(np.mean([r["si_sdr_db"] for r in group])),
            "mean_estoi": float(np.mean([r["estoi"] for r in group])),
        }
        for cond, group in sorted(aggregate.items())
    }
    atomic_write_json(os.path.join(out_dir, "report.json"), summary)
    print(f"wrote {csv_path} ({len(rows)} utterances)")
    return EXIT_OK


def cmd_export_beams(args) -> int:
    config = _load_config(args)
    out_dir = _default_out(args)
    os.makedirs(out_dir, exist_ok=True)
    manifest = load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    if args.bank:
        bank = load_bank(args.bank)
    else:
        bank = design_bank(
            config.geometry(), config.num_beams, config.diag_loading, config.stft
        )

    def export(item):
        _, mixture = read_wav(os.path.join(base, item["mixture_wav"]))
        _, clean = read_wav(os.path.join(base, item["target_direct_wav"]))
        spec = analyze(mixture, config.stft)
        beams = apply_bank(bank, spec)
        ref = spec.channel(config.reference_channel)
        clean_spec = analyze(clean[config.reference_channel], config.stft).channel(0)
        utt = item["id"]
        write_nbf1(os.path.join(out_dir, f"{utt}.beams.nbf"), beams.beams)
        write_nbf1(os.path.join(out_dir, f"{utt}.ref.nbf"), ref)
        write_nbf1(os.path.join(out_dir, f"{utt}.clean.nbf"), clean_spec)
        return {"id": utt, "beams_nbf": f"{utt}.beams.nbf",
                "ref_nbf": f"{utt}.ref.nbf", "clean_nbf": f"{utt}.clean.nbf",
                "num_frames": int(beams.num_frames)}

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        items = list(pool.map(export, manifest["items"]))

    atomic_write_json(os.path.join(out_dir, "export_manifest.json"), {
        "num_beams": bank.num_beams,
        "num_bins": bank.config.num_bins,
        "sample_rate_hz": bank.config.sample_rate_hz,
        "items": items,
    })
    print(f"exported beam tensors for {len(items)} utterances to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamfilt",
        description="Multi-beam filtering toolkit: simulate, enhance, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=False, bank=False, tensors=False):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory (default $NBF_DATA_DIR or .)")
        p.add_argument("--beams", type=int, help="override beam count D")
        p.add_argument("--provider", help="weight provider name")
        p.add_argument("--jobs", type=int, default=1, help="worker pool size")
        if manifest:
            p.add_argument("--manifest", required=True)
        if bank:
            p.add_argument("--bank", help="serialized bank (.nbf); designed "
                           "from config when omitted")
        if tensors:
            p.add_argument("--tensors", help="directory of external (G, R) "
                           "NBF1 tensors")

    p = sub.add_parser("design", help="design and serialize a beamformer bank")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="sample scenarios and render mixtures")
    common(p)
    p.add_argument("--count", type=int, default=10,
                   help="utterances per SIR condition")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enhance", help="run the enhancement pipeline")
    common(p, manifest=True, bank=True, tensors=True)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="score enhanced utterances")
    common(p, manifest=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-beams", help="export beam/reference/clean tensors")
    common(p, manifest=True, bank=True)
    p.set_defaults(func=cmd_export_beams)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Nbf1FormatError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
