"""Kernel trees: hierarchical neural encoding and neural SC decoding.

Geometry. With n = ell^depth, the code tree has ``depth`` stages; stage 0 is
adjacent to the message and stage depth-1 to the channel. Stage s holds
n / ell^(s+1) nodes; node b covers the contiguous span
[b * ell^(s+1), (b+1) * ell^(s+1)). A node's kernel maps ell values to ell
values and is applied (weight-shared) at the ell^s coordinate offsets of its
span, gathering positions {c + j * ell^s : j = 0..ell-1} — the radix-ell
butterfly. With every kernel in residual-only mode (zero weights, alpha=1)
the encoder reduces to the real-valued polar transform x = m @ G.

Encoding embeds the message as m (info bits mapped 0 -> +1, 1 -> -1; frozen
positions 0), runs the stages bottom-up, then applies the power constraint
(batch statistics while training, frozen calibration constants in eval).

Decoding mirrors the tree top-down in successive-cancellation order: the
position-j network of a node consumes the ell gathered soft values plus the
j feedback values of earlier siblings and emits one soft value per
coordinate (an LLR-like logit at the leaves). Decided sub-blocks are
re-encoded through the corresponding encoder kernels to form the feedback.
Frozen leaf positions always decode to 0; at an information leaf the
decision is bit 0 iff the logit is >= 0.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .attention import AttentionDecoderKernel
from .channel import NormStats, normalize_power
from .errors import ConfigurationError, DomainError
from .kernels import EncoderKernel, MlpDecoderKernel
from .polar import CodeConfig


def _node_key(stage: int, block: int) -> str:
    return f"s{stage}b{block}"


def message_to_tree_input(bits: torch.Tensor, config: CodeConfig) -> torch.Tensor:
    """Embed (B, k) message bits into the (B, n) bipolar tree input."""
    if bits.shape[-1] != config.k:
        raise ConfigurationError(f"expected {config.k} message bits, got {bits.shape[-1]}")
    dtype = bits.dtype if bits.is_floating_point() else torch.get_default_dtype()
    m = torch.zeros(bits.shape[0], config.n, dtype=dtype, device=bits.device)
    if config.k:
        info = torch.as_tensor(config.info_array, device=bits.device)
        m[:, info] = 1.0 - 2.0 * bits.to(dtype)
    return m


class NeuralCodec(nn.Module):
    """Encoder tree plus decoder tree for one code configuration.

    decoder_arch selects the per-position decoder networks: "attention"
    (self-attention enhanced) or "mlp" (plain bank of MLPs).
    """

    def __init__(self, config: CodeConfig, decoder_arch: str = "attention",
                 enc_hidden: int = 64, enc_layers: int = 3, enc_skip_layers: int = 2,
                 alpha: float = 1.0, dec_hidden: int = 128, dec_layers: int = 3,
                 heads: int = 4, d_k: int = 32, dropout_rate: float = 0.1):
        super().__init__()
        self.config = config
        self.decoder_arch = decoder_arch
        self.arch = {
            "decoder_arch": decoder_arch,
            "enc_hidden": enc_hidden, "enc_layers": enc_layers,
            "enc_skip_layers": enc_skip_layers, "alpha": alpha,
            "dec_hidden": dec_hidden, "dec_layers": dec_layers,
            "heads": heads, "d_k": d_k, "dropout_rate": dropout_rate,
        }
        ell = config.ell
        enc, dec = {}, {}
        for s in range(config.depth):
            for b in range(config.n // ell ** (s + 1)):
                enc[_node_key(s, b)] = EncoderKernel(
                    ell, hidden=enc_hidden, layers=enc_layers,
                    skip_layers=enc_skip_layers, alpha=alpha)
                if decoder_arch == "attention":
                    dec[_node_key(s, b)] = AttentionDecoderKernel(
                        ell, hidden=dec_hidden, layers=dec_layers, heads=heads,
                        d_k=d_k, dropout_rate=dropout_rate)
                elif decoder_arch == "mlp":
                    dec[_node_key(s, b)] = MlpDecoderKernel(
                        ell, hidden=dec_hidden, layers=dec_layers)
                else:
                    raise ConfigurationError(f"unknown decoder_arch {decoder_arch!r}")
        self.encoder_nodes = nn.ModuleDict(enc)
        self.decoder_nodes = nn.ModuleDict(dec)
        self.norm_stats: NormStats | None = None

    # --- module plumbing ------------------------------------------------

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def encoder_parameters(self):
        return self.encoder_nodes.parameters()

    def decoder_parameters(self):
        return self.decoder_nodes.parameters()

    def set_dropout_generator(self, generator):
        for node in self.decoder_nodes.values():
            if isinstance(node, AttentionDecoderKernel):
                node.set_dropout_generator(generator)

    def _as_tensor(self, x) -> torch.Tensor:
        if isinstance(x, torch.Tensor):
            return x.to(self.dtype)
        return torch.as_tensor(np.asarray(x)).to(self.dtype)

    # --- encoding ---------------------------------------------------------

    def _apply_encoder_stage(self, x: torch.Tensor, stage: int) -> torch.Tensor:
        ell = self.config.ell
        span = ell ** (stage + 1)
        width = ell**stage
        batch = x.shape[0]
        blocks = x.shape[1] // span
        # [B, block, j, c] view of positions block*span + j*width + c
        x = x.reshape(batch, blocks, ell, width)
        outs = []
        for b in range(blocks):
            kern = self.encoder_nodes[_node_key(stage, b)]
            y = x[:, b].transpose(1, 2).reshape(batch * width, ell)
            outs.append(kern(y).reshape(batch, width, ell).transpose(1, 2))
        return torch.stack(outs, dim=1).reshape(batch, blocks * span)

    def encode_raw(self, bits) -> torch.Tensor:
        """Run the kernel tree without the power constraint."""
        bits_t = self._as_tensor(bits)
        if bits_t.ndim != 2:
            raise DomainError("expected a (B, k) batch of messages")
        x = message_to_tree_input(bits_t, self.config).to(self.dtype)
        for s in range(self.config.depth):
            x = self._apply_encoder_stage(x, s)
        return x

    def encode(self, bits) -> torch.Tensor:
        """Encode to power-normalized codewords.

        Training mode uses batch statistics; evaluation mode requires frozen
        constants from :meth:`calibrate_norm` so single codewords are well
        defined.
        """
        x = self.encode_raw(bits)
        if self.training:
            normalized, _ = normalize_power(x)
            return normalized
        if self.norm_stats is None:
            raise ConfigurationError(
                "evaluation-mode encode requires calibrate_norm() first")
        normalized, _ = normalize_power(x, stats=self.norm_stats)
        return normalized

    def calibrate_norm(self, num_samples: int = 4096, seed: int = 0) -> NormStats:
        """Freeze power-normalization constants from a random calibration batch."""
        gen = torch.Generator().manual_seed(seed)
        bits = torch.randint(0, 2, (num_samples, self.config.k), generator=gen)
        with torch.no_grad():
            x = self.encode_raw(bits)
            _, stats = normalize_power(x)
        self.norm_stats = stats
        return stats

    # --- decoding ---------------------------------------------------------

    def decode(self, llr, teacher_bits=None):
        """Neural SC decoding.

        llr: (B, n) channel LLRs (positive favors bit 0). Returns
        ``(bits, logits)`` where bits is the (B, k) hard message and logits
        the (B, n) per-position soft outputs (sign rule: >= 0 decodes to 0).
        With ``teacher_bits`` given, decision feedback uses the true bits
        (teacher forcing) while logits and bits are still computed.
        """
        llr_t = self._as_tensor(llr)
        if llr_t.ndim != 2 or llr_t.shape[1] != self.config.n:
            raise DomainError(f"expected llr shape (B, {self.config.n})")
        if not torch.isfinite(llr_t).all():
            raise DomainError("llr contains NaN or Inf")
        batch = llr_t.shape[0]
        teacher_m = None
        if teacher_bits is not None:
            teacher_m = message_to_tree_input(self._as_tensor(teacher_bits), self.config)
            teacher_m = teacher_m.to(self.dtype)
        logits = llr_t.new_zeros(batch, self.config.n)
        hard = torch.zeros(batch, self.config.n, dtype=torch.int64, device=llr_t.device)
        self._decode_node(self.config.depth - 1, 0, llr_t, teacher_m, logits, hard)
        bits = hard[:, self.config.info_array]
        return bits, logits

    def _decode_node(self, stage, block, soft, teacher_m, logits, hard):
        """Decode one node; returns the re-encoded (B, span) feedback codeword."""
        ell = self.config.ell
        dec_kern = self.decoder_nodes[_node_key(stage, block)]
        enc_kern = self.encoder_nodes[_node_key(stage, block)]
        batch = soft.shape[0]
        frozen = self.config.frozen_mask()

        if stage == 0:
            start = block * ell
            fed = []
            for j in range(ell):
                pos = start + j
                prefix = (torch.stack(fed, dim=-1) if fed
                          else soft.new_zeros(batch, 0))
                logit = dec_kern.position_forward(j, soft, prefix)
                logits[:, pos] = logit
                if frozen[pos]:
                    hard[:, pos] = 0
                    decided = soft.new_zeros(batch)
                else:
                    bit = (logit < 0).long()
                    hard[:, pos] = bit
                    decided = 1.0 - 2.0 * bit.to(soft.dtype)
                if teacher_m is not None:
                    fed.append(teacher_m[:, pos])
                else:
                    fed.append(decided)
            block_m = torch.stack(fed, dim=-1)
            return enc_kern(block_m)

        width = ell**stage
        view = soft.reshape(batch, ell, width)  # [., j, c] = soft[., j*width + c]
        gathered = view.transpose(1, 2)  # (B, width, ell)
        feedback = []
        for j in range(ell):
            prefix = (torch.stack(feedback, dim=-1) if feedback
                      else soft.new_zeros(batch, width, 0))
            child_soft = dec_kern.position_forward(j, gathered, prefix)  # (B, width)
            feedback.append(self._decode_node(
                stage - 1, block * ell + j, child_soft, teacher_m, logits, hard))
        stacked = torch.stack(feedback, dim=-1)  # (B, width, ell)
        out = enc_kern(stacked.reshape(batch * width, ell)).reshape(batch, width, ell)
        return out.transpose(1, 2).reshape(batch, ell * width)


def encode_tree(bits, codec: NeuralCodec) -> torch.Tensor:
    """Functional alias for :meth:`NeuralCodec.encode`."""
    return codec.encode(bits)


def decode_tree(llr, codec: NeuralCodec, teacher_bits=None):
    """Functional alias for :meth:`NeuralCodec.decode`."""
    return codec.decode(llr, teacher_bits=teacher_bits)
