"""Attention-enhanced decoder kernels.

Each per-position network embeds its ell + j scalar inputs into a token
sequence (one token per input, via the columns of the input projection),
runs a residual multi-head self-attention block with layer normalization and
dropout, mean-pools the tokens and finishes with a SELU feed-forward stack
producing one logit.

Dropout draws from an explicitly threaded torch.Generator so training runs
are reproducible; in evaluation mode dropout is the identity.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .errors import ConfigurationError, DomainError

_LN_EPS = 1e-6


def scaled_dot_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """softmax(Q K^T / sqrt(d_k)) V over the last two axes (..., T, d_k)."""
    if q.shape[-2] == 0:
        raise DomainError("attention requires at least one token")
    d_k = q.shape[-1]
    scores = q @ k.transpose(-2, -1) / math.sqrt(d_k)
    return torch.softmax(scores, dim=-1) @ v


def _seeded_dropout(x: torch.Tensor, rate: float, generator) -> torch.Tensor:
    if rate <= 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device) >= rate
    return x * keep / (1.0 - rate)


class AttentionBlock(nn.Module):
    """Residual multi-head self-attention with dropout and layer norm.

    forward(X) = LayerNorm(X + Dropout(MultiHead(X, X, X))) with per-head
    query/key/value projections of shape (hidden, d_k) and an output
    projection of shape (heads * d_k, hidden). Requires heads * d_k == hidden.
    """

    def __init__(self, hidden: int = 128, heads: int = 4, d_k: int = 32,
                 dropout_rate: float = 0.1):
        super().__init__()
        if heads * d_k != hidden:
            raise ConfigurationError(
                f"heads * d_k must equal hidden: {heads}*{d_k} != {hidden}")
        self.hidden = hidden
        self.heads = heads
        self.d_k = d_k
        self.dropout_rate = float(dropout_rate)
        self.q_proj = nn.Linear(hidden, heads * d_k, bias=False)
        self.k_proj = nn.Linear(hidden, heads * d_k, bias=False)
        self.v_proj = nn.Linear(hidden, heads * d_k, bias=False)
        self.out_proj = nn.Linear(heads * d_k, hidden, bias=False)
        self.ln_gain = nn.Parameter(torch.ones(hidden))
        self.ln_bias = nn.Parameter(torch.zeros(hidden))
        self.dropout_generator = None

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        # (..., T, heads*d_k) -> (..., heads, T, d_k)
        shape = x.shape[:-1] + (self.heads, self.d_k)
        return x.reshape(shape).transpose(-3, -2)

    def multi_head(self, x: torch.Tensor) -> torch.Tensor:
        """Concatenated per-head attention outputs, projected back to hidden."""
        if x.shape[-1] != self.hidden:
            raise ConfigurationError(f"expected width {self.hidden}, got {x.shape[-1]}")
        q = self._split_heads(self.q_proj(x))
        k = self._split_heads(self.k_proj(x))
        v = self._split_heads(self.v_proj(x))
        heads = scaled_dot_attention(q, k, v)  # (..., heads, T, d_k)
        merged = heads.transpose(-3, -2).reshape(x.shape[:-1] + (self.heads * self.d_k,))
        return self.out_proj(merged)

    def layer_norm(self, x: torch.Tensor) -> torch.Tensor:
        # fused equivalent of (x - mean) / sqrt(biased_var + eps) * gain + bias
        return torch.nn.functional.layer_norm(
            x, (self.hidden,), weight=self.ln_gain, bias=self.ln_bias, eps=_LN_EPS)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        att = self.multi_head(x)
        if self.training:
            att = _seeded_dropout(att, self.dropout_rate, self.dropout_generator)
        return self.layer_norm(x + att)


class AttentionDecoderPositionNet(nn.Module):
    """Attention-enhanced per-position decoder network: (ell + j) inputs -> 1 logit."""

    def __init__(self, ell: int, position: int, hidden: int = 128, layers: int = 3,
                 heads: int = 4, d_k: int = 32, dropout_rate: float = 0.1):
        super().__init__()
        self.in_features = ell + position
        self.hidden = hidden
        self.input_proj = nn.Linear(self.in_features, hidden, bias=False)
        self.attention = AttentionBlock(hidden=hidden, heads=heads, d_k=d_k,
                                        dropout_rate=dropout_rate)
        self.ff = nn.ModuleList(
            [nn.Linear(hidden, hidden, bias=False) for _ in range(layers - 1)]
        )
        self.ff.append(nn.Linear(hidden, 1, bias=False))

    def tokens(self, z: torch.Tensor) -> torch.Tensor:
        # One token per scalar input: column i of the input projection scaled
        # by input i, so the columns act as learned position embeddings.
        return z.unsqueeze(-1) * self.input_proj.weight.t()

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.in_features:
            raise ConfigurationError(
                f"position net expects {self.in_features} inputs, got {z.shape[-1]}")
        x = torch.selu(self.tokens(z))
        x = self.attention(x)
        h = x.mean(dim=-2)
        for lin in self.ff:
            h = lin(torch.selu(h))
        return h.squeeze(-1)


class AttentionDecoderKernel(nn.Module):
    """Bank of ell attention-enhanced per-position networks for one tree node."""

    def __init__(self, ell: int, hidden: int = 128, layers: int = 3, heads: int = 4,
                 d_k: int = 32, dropout_rate: float = 0.1):
        super().__init__()
        self.ell = ell
        self.positions = nn.ModuleList([
            AttentionDecoderPositionNet(ell, j, hidden=hidden, layers=layers, heads=heads,
                                        d_k=d_k, dropout_rate=dropout_rate)
            for j in range(ell)
        ])

    def position_forward(self, j: int, soft: torch.Tensor, prefix: torch.Tensor) -> torch.Tensor:
        z = torch.cat([soft, prefix], dim=-1) if j > 0 else soft
        return self.positions[j](z)

    def set_dropout_generator(self, generator):
        for pos in self.positions:
            pos.attention.dropout_generator = generator
