"""Training engine: losses wiring, two-phase curriculum, alternating updates.

Phase 1 progressively trains single-kernel codes (n = ell, k = 1..ell), each
stage warm-started from the previous one. Phase 2 assembles the full kernel
tree from the last stage's weights and trains end to end with the joint
bit/block objective, alternating decoder and encoder updates at their
respective training SNRs, under cosine-annealing-with-warm-restarts.

All randomness inside the loops (messages, noise, dropout) is drawn from one
torch.Generator whose state is checkpointed, so an interrupted run resumed
from a checkpoint reproduces the uninterrupted run bit for bit. Validation
uses its own per-epoch generator derived from (seed, epoch) and does not
touch the training stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .channel import normalize_power, snr_db_to_sigma
from .checkpoint import Checkpoint, codec_to_checkpoint, optimizer_state_from_checkpoint
from .errors import ConfigurationError, TrainingDivergedError
from .losses import LossConfig, SchedulerConfig, cosine_warm_restart_lr, total_loss
from .polar import CodeConfig, build_info_set
from .trees import NeuralCodec


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both curriculum phases plus model architecture."""

    epochs: int = 500
    steps_per_epoch: int = 10
    batch_size: int = 20000
    learning_rate: float = 1e-3
    snr_pair: tuple[float, float] = (0.0, -2.0)  # (encoder, decoder) training SNR in dB
    scheduler: SchedulerConfig = SchedulerConfig()
    enc_dec_step_ratio: int = 5  # decoder steps per encoder step
    seed: int = 0
    design_snr_db: float = -2.0
    phase1_epochs: int = 10
    val_batch_size: int = 2000
    checkpoint_every: int = 0  # epochs between phase-2 checkpoints; 0 = final only
    snr_sample_range: tuple[float, float] | None = None  # uniform SNR sampling if set
    loss: LossConfig = LossConfig()
    # architecture
    decoder_arch: str = "attention"
    enc_hidden: int = 64
    enc_layers: int = 3
    enc_skip_layers: int = 2
    alpha: float = 1.0
    dec_hidden: int = 128
    dec_layers: int = 3
    heads: int = 4
    d_k: int = 32
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.steps_per_epoch < 1:
            raise ConfigurationError("epochs and steps_per_epoch must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.enc_dec_step_ratio < 1:
            raise ConfigurationError("enc_dec_step_ratio must be >= 1")

    def arch_kwargs(self) -> dict:
        return {
            "decoder_arch": self.decoder_arch,
            "enc_hidden": self.enc_hidden, "enc_layers": self.enc_layers,
            "enc_skip_layers": self.enc_skip_layers, "alpha": self.alpha,
            "dec_hidden": self.dec_hidden, "dec_layers": self.dec_layers,
            "heads": self.heads, "d_k": self.d_k, "dropout_rate": self.dropout_rate,
        }


def make_codec(config: CodeConfig, train_cfg: TrainConfig) -> NeuralCodec:
    return NeuralCodec(config, **train_cfg.arch_kwargs())


def _step_snr(train_cfg: TrainConfig, encoder_step: bool, generator) -> float:
    if train_cfg.snr_sample_range is not None:
        lo, hi = train_cfg.snr_sample_range
        u = torch.rand((), generator=generator).item()
        return lo + (hi - lo) * u
    return train_cfg.snr_pair[0] if encoder_step else train_cfg.snr_pair[1]


def training_step(codec: NeuralCodec, train_cfg: TrainConfig, generator,
                  encoder_step: bool) -> torch.Tensor:
    """One forward/backward pass; returns the (detached) total loss."""
    cfg = codec.config
    sigma = snr_db_to_sigma(_step_snr(train_cfg, encoder_step, generator))
    bits = torch.randint(0, 2, (train_cfg.batch_size, cfg.k), generator=generator)
    x = codec.encode(bits)
    noise = torch.randn(x.shape, generator=generator, dtype=x.dtype)
    llr = (2.0 / sigma**2) * (x + sigma * noise)
    _, logits = codec.decode(llr, teacher_bits=bits)
    info_logits = logits[:, torch.as_tensor(cfg.info_array)]
    # decoder logits follow the ">= 0 decodes to 0" rule; losses expect the
    # opposite sign, hence the negation
    return total_loss(-info_logits, bits.to(info_logits.dtype), train_cfg.loss)


def _run_steps(codec, train_cfg, generator, opt_enc, opt_dec, lr, global_step, n_steps):
    """Run n_steps alternating updates; returns (mean loss, new global_step)."""
    for group in list(opt_enc.param_groups) + list(opt_dec.param_groups):
        group["lr"] = lr
    losses = []
    cycle = train_cfg.enc_dec_step_ratio + 1
    for _ in range(n_steps):
        encoder_step = (global_step % cycle) == train_cfg.enc_dec_step_ratio
        loss = training_step(codec, train_cfg, generator, encoder_step)
        loss_val = float(loss.detach())
        if not np.isfinite(loss_val):
            raise TrainingDivergedError(
                f"loss became non-finite at global step {global_step}",
                diagnostics={"global_step": global_step, "loss": loss_val})
        opt_enc.zero_grad(set_to_none=True)
        opt_dec.zero_grad(set_to_none=True)
        loss.backward()
        (opt_enc if encoder_step else opt_dec).step()
        losses.append(loss_val)
        global_step += 1
    return float(np.mean(losses)), global_step


def evaluate_codec(codec: NeuralCodec, snr_db: float, batch_size: int, seed: int,
                   loss_cfg: LossConfig = LossConfig()) -> dict:
    """Loss/BER/BLER of a codec on one fresh validation batch (no teacher)."""
    cfg = codec.config
    gen = torch.Generator().manual_seed(seed)
    was_training = codec.training
    codec.eval()
    sigma = snr_db_to_sigma(snr_db)
    with torch.no_grad():
        bits = torch.randint(0, 2, (batch_size, cfg.k), generator=gen)
        x = codec.encode_raw(bits)
        x, _ = normalize_power(x)
        noise = torch.randn(x.shape, generator=gen, dtype=x.dtype)
        llr = (2.0 / sigma**2) * (x + sigma * noise)
        hard, logits = codec.decode(llr)
        info_logits = logits[:, torch.as_tensor(cfg.info_array)]
        loss = total_loss(-info_logits, bits.to(info_logits.dtype), loss_cfg)
        errs = (hard != bits).to(torch.float64)
        ber = float(errs.mean())
        bler = float((errs.sum(dim=1) > 0).to(torch.float64).mean())
    if was_training:
        codec.train()
    return {"loss": float(loss), "ber": ber, "bler": bler}


def _make_optimizers(codec: NeuralCodec, lr: float):
    opt_enc = torch.optim.Adam(list(codec.encoder_parameters()), lr=lr)
    opt_dec = torch.optim.Adam(list(codec.decoder_parameters()), lr=lr)
    return opt_enc, opt_dec


def curriculum_phase1(ell: int, train_cfg: TrainConfig) -> list[NeuralCodec]:
    """Progressive single-kernel training for k = 1..ell; returns all stages."""
    if ell < 2 or (ell & (ell - 1)) != 0:
        raise ConfigurationError(f"ell must be a power of 2, got {ell}")
    stages: list[NeuralCodec] = []
    torch.manual_seed(train_cfg.seed)
    generator = torch.Generator().manual_seed(train_cfg.seed + 1)
    prev_state = None
    for k in range(1, ell + 1):
        cfg = build_info_set(ell, k, ell, train_cfg.design_snr_db)
        codec = make_codec(cfg, train_cfg)
        if prev_state is not None:
            codec.load_state_dict(prev_state)
        codec.train()
        codec.set_dropout_generator(generator)
        opt_enc, opt_dec = _make_optimizers(codec, train_cfg.learning_rate)
        global_step = 0
        try:
            for _ in range(train_cfg.phase1_epochs):
                _, global_step = _run_steps(
                    codec, train_cfg, generator, opt_enc, opt_dec,
                    train_cfg.learning_rate, global_step, train_cfg.steps_per_epoch)
        except TrainingDivergedError as err:
            err.diagnostics["phase1_stage_k"] = k
            raise
        prev_state = codec.state_dict()
        codec.eval()
        stages.append(codec)
    return stages


def assemble_from_kernels(donor: NeuralCodec, config: CodeConfig,
                          train_cfg: TrainConfig) -> NeuralCodec:
    """Full (n, k) tree with every node initialized from a single-kernel donor."""
    if donor.config.ell != config.ell:
        raise ConfigurationError("donor kernel size does not match the code")
    codec = make_codec(config, train_cfg)
    enc_state = donor.encoder_nodes["s0b0"].state_dict()
    dec_state = donor.decoder_nodes["s0b0"].state_dict()
    for node in codec.encoder_nodes.values():
        node.load_state_dict(enc_state)
    for node in codec.decoder_nodes.values():
        node.load_state_dict(dec_state)
    return codec


@dataclass
class TrainResult:
    codec: NeuralCodec
    history: list[dict] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)


def curriculum_phase2(pretrained: list[NeuralCodec] | NeuralCodec, config: CodeConfig,
                      train_cfg: TrainConfig, checkpoint_dir=None,
                      resume_from: Checkpoint | None = None) -> TrainResult:
    """End-to-end training of the full code from pretrained kernels.

    Writes periodic checkpoints when ``checkpoint_dir`` is given (every
    ``checkpoint_every`` epochs plus the final epoch). On divergence the last
    good checkpoint is kept and reported in the raised error.
    """
    donor = pretrained[-1] if isinstance(pretrained, (list, tuple)) else pretrained
    torch.manual_seed(train_cfg.seed)
    generator = torch.Generator().manual_seed(train_cfg.seed + 2)

    if resume_from is not None:
        from .checkpoint import checkpoint_to_codec  # local import to avoid cycle noise

        codec = checkpoint_to_codec(resume_from)
        opt_enc, opt_dec = _make_optimizers(codec, train_cfg.learning_rate)
        for tag, opt in (("enc", opt_enc), ("dec", opt_dec)):
            state = optimizer_state_from_checkpoint(resume_from, tag)
            if state is not None:
                opt.load_state_dict(state)
        if "rng/torch" in resume_from.arrays:
            generator.set_state(torch.from_numpy(resume_from.arrays["rng/torch"].copy()))
        start_epoch = resume_from.epoch
        history = list(resume_from.metadata.get("history", []))
    else:
        codec = assemble_from_kernels(donor, config, train_cfg)
        opt_enc, opt_dec = _make_optimizers(codec, train_cfg.learning_rate)
        start_epoch = 0
        history = []
        init = evaluate_codec(codec, train_cfg.snr_pair[1], train_cfg.val_batch_size,
                              seed=train_cfg.seed * 100_003, loss_cfg=train_cfg.loss)
        history.append({"epoch": 0, "lr": 0.0, "train_loss": math.nan,
                        "val_loss": init["loss"], "val_ber": init["ber"],
                        "val_bler": init["bler"]})

    codec.set_dropout_generator(generator)
    result = TrainResult(codec=codec, history=history)
    global_step = start_epoch * train_cfg.steps_per_epoch
    last_ckpt_path = None

    def write_checkpoint(epoch):
        nonlocal last_ckpt_path
        if checkpoint_dir is None:
            return
        codec.calibrate_norm(seed=train_cfg.seed)
        ckpt = codec_to_checkpoint(
            codec, epoch=epoch, snr_pair=train_cfg.snr_pair,
            optimizers={"enc": opt_enc, "dec": opt_dec},
            rng_state=generator.get_state(),
            metadata={"history": history, "phase": 2})
        path = str(Path(checkpoint_dir) / f"epoch{epoch:05d}.ckpt")
        ckpt.save(path)
        result.checkpoints.append(path)
        last_ckpt_path = path

    for epoch in range(start_epoch, train_cfg.epochs):
        lr = cosine_warm_restart_lr(epoch, train_cfg.learning_rate, train_cfg.scheduler)
        codec.train()
        try:
            train_loss, global_step = _run_steps(
                codec, train_cfg, generator, opt_enc, opt_dec, lr,
                global_step, train_cfg.steps_per_epoch)
        except TrainingDivergedError as err:
            err.diagnostics["epoch"] = epoch
            raise TrainingDivergedError(
                f"phase 2 diverged at epoch {epoch}: {err}",
                last_checkpoint=last_ckpt_path,
                diagnostics=err.diagnostics) from err
        val = evaluate_codec(codec, train_cfg.snr_pair[1], train_cfg.val_batch_size,
                             seed=train_cfg.seed * 100_003 + epoch + 1,
                             loss_cfg=train_cfg.loss)
        history.append({"epoch": epoch + 1, "lr": lr, "train_loss": train_loss,
                        "val_loss": val["loss"], "val_ber": val["ber"],
                        "val_bler": val["bler"]})
        is_last = epoch + 1 == train_cfg.epochs
        if is_last or (train_cfg.checkpoint_every
                       and (epoch + 1) % train_cfg.checkpoint_every == 0):
            write_checkpoint(epoch + 1)

    codec.calibrate_norm(seed=train_cfg.seed)
    codec.eval()
    return result


def train_full(config: CodeConfig, train_cfg: TrainConfig, checkpoint_dir=None) -> TrainResult:
    """Run both curriculum phases for a code configuration."""
    stages = curriculum_phase1(config.ell, train_cfg)
    return curriculum_phase2(stages, config, train_cfg, checkpoint_dir=checkpoint_dir)
