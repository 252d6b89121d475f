"""Command-line interface: train, eval, smart-eval, analyze-distances, plot.

Exit codes: 0 success, 1 user error (bad arguments, invalid config, missing
files), 2 runtime failure (divergence, unexpected errors). Every run writes
a JSON manifest with the config digest, package version, seeds and produced
files, sufficient to reproduce the run exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .checkpoint import Checkpoint, checkpoint_to_codec, codec_to_checkpoint
from .config import ExperimentConfig, load_experiment
from .crc import crc_spec
from .errors import ConfigurationError, DomainError, NeuralPolarError, TrainingDivergedError
from .harness import (
    CSV_COLUMNS,
    NeuralCodecAdapter,
    ScPolarCodec,
    SmartCodecAdapter,
    pairwise_distance_analysis,
    run_ber_bler,
)
from .smart import EnsembleMember, EnsembleSpec
from .training import curriculum_phase1, curriculum_phase2

USER_ERROR = 1
RUNTIME_ERROR = 2


class _CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig | None,
                    outputs: list[str], extra: dict | None = None):
    manifest = {
        "command": command,
        "package_version": __version__,
        "argv": sys.argv[1:],
        "config_digest": cfg.digest() if cfg else None,
        "seed": cfg.seed if cfg else None,
        "config": cfg.raw if cfg else None,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"{command}.manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return str(path)


def _write_stats_csv(path: Path, stats_rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for stats in stats_rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in stats.csv_row()])


def _load_ensemble(cfg: ExperimentConfig) -> EnsembleSpec:
    if cfg.ensemble is None:
        raise ConfigurationError("this command needs an 'ensemble' config section")
    members = []
    for path, pair, label in zip(cfg.ensemble.checkpoints, cfg.ensemble.snr_pairs,
                                 cfg.ensemble.labels):
        codec = checkpoint_to_codec(Checkpoint.load(path))
        members.append(EnsembleMember(codec=codec, snr_pair=pair, label=label))
    return EnsembleSpec(members=members, crc=crc_spec(cfg.ensemble.crc),
                        fallback_index=cfg.ensemble.fallback_index)


# --- commands -------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = load_experiment(args.config, seed_override=args.seed,
                          output_dir_override=args.output_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out_dir / "checkpoints"
    torch.set_num_threads(args.threads)

    resume = Checkpoint.load(args.resume) if args.resume else None
    if resume is None:
        stages = curriculum_phase1(cfg.code.ell, cfg.train)
        pretrained = stages
    else:
        pretrained = checkpoint_to_codec(resume)  # kernels come from the checkpoint
    result = curriculum_phase2(pretrained, cfg.code, cfg.train,
                               checkpoint_dir=ckpt_dir, resume_from=resume)

    final_path = out_dir / "model.ckpt"
    codec_to_checkpoint(result.codec, epoch=cfg.train.epochs,
                        snr_pair=cfg.train.snr_pair,
                        metadata={"history": result.history}).save(final_path)
    log_path = out_dir / "training_log.csv"
    with open(log_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "lr", "train_loss", "val_loss", "val_ber", "val_bler"])
        for row in result.history:
            writer.writerow([row["epoch"], repr(float(row["lr"])),
                             repr(float(row["train_loss"])), repr(float(row["val_loss"])),
                             repr(float(row["val_ber"])), repr(float(row["val_bler"]))])
    outputs = [str(final_path), str(log_path)] + result.checkpoints
    _write_manifest(out_dir, "train", cfg, outputs)
    print(f"trained {cfg.code.n},{cfg.code.k} model -> {final_path}")
    print(f"final val BER {result.history[-1]['val_ber']:.4g} "
          f"BLER {result.history[-1]['val_bler']:.4g}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_experiment(args.config, seed_override=args.seed,
                          output_dir_override=args.output_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(args.threads)
    rows = []
    decoders = args.decoder
    if "sc" in decoders:
        rows += run_ber_bler(ScPolarCodec(cfg.code, rule=args.sc_rule), cfg.eval.snr_db,
                             min_block_errors=cfg.eval.min_block_errors,
                             max_blocks=cfg.eval.max_blocks, seed=cfg.seed,
                             batch_blocks=cfg.eval.batch_blocks)
    if "neural" in decoders:
        if not args.checkpoint:
            raise ConfigurationError("--checkpoint is required for the neural decoder")
        codec = checkpoint_to_codec(Checkpoint.load(args.checkpoint))
        if codec.config != cfg.code:
            raise ConfigurationError(
                "checkpoint code configuration does not match the experiment config")
        adapter = NeuralCodecAdapter(codec, decoder_id=f"neural-{codec.decoder_arch}")
        rows += run_ber_bler(adapter, cfg.eval.snr_db,
                             min_block_errors=cfg.eval.min_block_errors,
                             max_blocks=cfg.eval.max_blocks, seed=cfg.seed,
                             batch_blocks=cfg.eval.batch_blocks)
    csv_path = out_dir / (args.output or "results.csv")
    _write_stats_csv(csv_path, rows)
    _write_manifest(out_dir, "eval", cfg, [str(csv_path)],
                    extra={"checkpoint": args.checkpoint})
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def cmd_smart_eval(args) -> int:
    cfg = load_experiment(args.config, seed_override=args.seed,
                          output_dir_override=args.output_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(args.threads)
    spec = _load_ensemble(cfg)
    adapter = SmartCodecAdapter(
        spec, decoder_id=f"smart-{cfg.ensemble.crc}-M{len(spec.members)}")
    rows = run_ber_bler(adapter, cfg.eval.snr_db,
                        min_block_errors=cfg.eval.min_block_errors,
                        max_blocks=cfg.eval.max_blocks, seed=cfg.seed,
                        batch_blocks=cfg.eval.batch_blocks)
    csv_path = out_dir / (args.output or "smart_results.csv")
    _write_stats_csv(csv_path, rows)
    _write_manifest(out_dir, "smart-eval", cfg, [str(csv_path)])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def cmd_analyze_distances(args) -> int:
    cfg = load_experiment(args.config, seed_override=args.seed,
                          output_dir_override=args.output_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(args.threads)
    codec = checkpoint_to_codec(Checkpoint.load(args.checkpoint))
    adapter = NeuralCodecAdapter(codec)
    code_hist, ref_hist = pairwise_distance_analysis(
        adapter.encode, payload_bits=codec.config.k, n=codec.config.n,
        sample_count=args.samples, seed=cfg.seed)
    csv_path = out_dir / (args.output or "distances.csv")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["kind", "bin_left", "bin_right", "count"])
        for kind, hist in (("code", code_hist), ("gaussian", ref_hist)):
            for left, right, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:],
                                          hist.counts):
                writer.writerow([kind, repr(float(left)), repr(float(right)), int(count)])
    _write_manifest(out_dir, "analyze-distances", cfg, [str(csv_path)], extra={
        "checkpoint": args.checkpoint,
        "code_mean": code_hist.mean, "code_variance": code_hist.variance,
        "gaussian_mean": ref_hist.mean, "gaussian_variance": ref_hist.variance,
    })
    print(f"wrote {csv_path}; code mean {code_hist.mean:.4f}, "
          f"gaussian mean {ref_hist.mean:.4f}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import plot_distance_histogram, plot_error_curves

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "curves":
        plot_error_curves(args.input, out)
    else:
        plot_distance_histogram(args.input, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(prog="neuralpolar",
                        description="Neural polar coding laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="config YAML path or preset name (tiny16, paper256)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--output-dir", default=None, help="override config output_dir")
        p.add_argument("--threads", type=int, default=1, help="torch CPU threads")

    p_train = sub.add_parser("train", help="run the two-phase curriculum")
    common(p_train)
    p_train.add_argument("--resume", default=None, help="checkpoint to resume phase 2 from")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="Monte-Carlo BER/BLER sweep")
    common(p_eval)
    p_eval.add_argument("--checkpoint", default=None, help="trained model checkpoint")
    p_eval.add_argument("--decoder", nargs="+", choices=["sc", "neural"],
                        default=["sc", "neural"])
    p_eval.add_argument("--sc-rule", choices=["tanh", "minsum"], default="tanh")
    p_eval.add_argument("--output", default=None, help="CSV filename inside output dir")
    p_eval.set_defaults(fn=cmd_eval)

    p_smart = sub.add_parser("smart-eval", help="evaluate a CRC-guided ensemble")
    common(p_smart)
    p_smart.add_argument("--output", default=None)
    p_smart.set_defaults(fn=cmd_smart_eval)

    p_dist = sub.add_parser("analyze-distances",
                            help="pairwise codeword distance distribution")
    common(p_dist)
    p_dist.add_argument("--checkpoint", required=True)
    p_dist.add_argument("--samples", type=int, default=10_000)
    p_dist.add_argument("--output", default=None)
    p_dist.set_defaults(fn=cmd_analyze_distances)

    p_plot = sub.add_parser("plot", help="render figures from result CSVs")
    p_plot.add_argument("--input", required=True, help="input CSV")
    p_plot.add_argument("--output", required=True, help="output image path")
    p_plot.add_argument("--kind", choices=["curves", "histogram"], default="curves")
    p_plot.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigurationError, DomainError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USER_ERROR
    except TrainingDivergedError as err:
        print(f"training diverged: {err}", file=sys.stderr)
        if err.last_checkpoint:
            print(f"last good checkpoint: {err.last_checkpoint}", file=sys.stderr)
        return RUNTIME_ERROR
    except NeuralPolarError as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
