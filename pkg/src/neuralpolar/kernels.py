"""Learned encoder and base decoder kernels.

An encoder kernel maps ell real inputs to ell real outputs through an MLP
with a skip pathway and a linear polar-augmentation residual gated by alpha.
A base decoder kernel is a bank of ell per-position MLPs; the network for
relative position j consumes the ell soft inputs plus the j earlier
decisions and emits one logit.

All linear layers are bias-free (the maps are plain weight matrices) and use
SELU activations. The polar residual follows the package-wide row-vector
convention: ``augment(y) = y @ G`` with G the ell x ell binary polar matrix
taken as a real matrix.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .errors import ConfigurationError
from .polar import polar_kernel_matrix


def _selu(x):
    return torch.selu(x)


class EncoderKernel(nn.Module):
    """One ell -> ell neural encoding kernel with polar augmentation.

    main path:  W_{L+1}( phi(W_L ... phi(W_1 y)) + s(y) ) + alpha * (y @ G)
    skip path:  s(y) = V_M phi(V_{M-1} ... phi(V_1 [y; y @ G]))
    """

    def __init__(self, ell: int, hidden: int = 64, layers: int = 3, skip_layers: int = 2,
                 alpha: float = 1.0):
        super().__init__()
        if layers < 1 or skip_layers < 1:
            raise ConfigurationError("encoder kernel needs layers >= 1 and skip_layers >= 1")
        self.ell = ell
        self.hidden = hidden
        self.alpha = float(alpha)
        dims = [ell] + [hidden] * layers
        self.main = nn.ModuleList(
            [nn.Linear(dims[i], dims[i + 1], bias=False) for i in range(layers)]
        )
        self.main.append(nn.Linear(hidden, ell, bias=False))
        skip_dims = [2 * ell] + [hidden] * skip_layers
        self.skip = nn.ModuleList(
            [nn.Linear(skip_dims[i], skip_dims[i + 1], bias=False) for i in range(skip_layers)]
        )
        self.register_buffer("polar_matrix", torch.from_numpy(
            polar_kernel_matrix(ell).astype("float32")))

    def augment(self, y: torch.Tensor) -> torch.Tensor:
        return y @ self.polar_matrix

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        if y.shape[-1] != self.ell:
            raise ConfigurationError(f"expected {self.ell} inputs, got {y.shape[-1]}")
        a = self.augment(y)
        s = torch.cat([y, a], dim=-1)
        for lin in self.skip[:-1]:
            s = _selu(lin(s))
        s = self.skip[-1](s)
        z = y
        for lin in self.main[:-1]:
            z = _selu(lin(z))
        return self.main[-1](z + s) + self.alpha * a


class MlpDecoderPositionNet(nn.Module):
    """Per-position decoder network: (ell + j) inputs -> 1 logit."""

    def __init__(self, ell: int, position: int, hidden: int = 128, layers: int = 3):
        super().__init__()
        self.in_features = ell + position
        dims = [self.in_features] + [hidden] * layers
        self.net = nn.ModuleList(
            [nn.Linear(dims[i], dims[i + 1], bias=False) for i in range(layers)]
        )
        self.net.append(nn.Linear(hidden, 1, bias=False))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.in_features:
            raise ConfigurationError(
                f"position net expects {self.in_features} inputs, got {z.shape[-1]}")
        for lin in self.net[:-1]:
            z = _selu(lin(z))
        return self.net[-1](z).squeeze(-1)


class MlpDecoderKernel(nn.Module):
    """Bank of ell per-position MLP decoder networks for one tree node."""

    def __init__(self, ell: int, hidden: int = 128, layers: int = 3):
        super().__init__()
        self.ell = ell
        self.positions = nn.ModuleList(
            [MlpDecoderPositionNet(ell, j, hidden=hidden, layers=layers) for j in range(ell)]
        )

    def position_forward(self, j: int, soft: torch.Tensor, prefix: torch.Tensor) -> torch.Tensor:
        """Logit for relative position j from soft inputs and decided prefix.

        soft: (..., ell); prefix: (..., j). Returns (...,) logits.
        """
        z = torch.cat([soft, prefix], dim=-1) if j > 0 else soft
        return self.positions[j](z)
