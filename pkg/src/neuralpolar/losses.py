"""Joint bit- and block-level training objective, plus the LR schedule.

The total objective is the sum of a per-bit binary cross-entropy and a
differentiable block error term

    block = -(1/B) sum_i log( prod_j P(u_ij | logit_ij) + eps )

where P(u|logit) = sigmoid(logit) for u = 1 and 1 - sigmoid(logit) for
u = 0, and eps prevents numerical underflow of the product.

Sign bridge: these losses treat a positive logit as favoring bit 1, while
the decoder's decision rule maps logit >= 0 to bit 0. The training engine
negates decoder logits before computing losses so both conventions hold
verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class LossConfig:
    epsilon: float = 1e-10
    batch_size: int = 0  # informational; losses infer B from the input shape

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")


def _check_shapes(logits: torch.Tensor, targets: torch.Tensor):
    if logits.shape != targets.shape:
        raise DomainError(f"shape mismatch: logits {tuple(logits.shape)} vs targets {tuple(targets.shape)}")
    if logits.ndim != 2:
        raise DomainError("expected (B, k) logits")


def bce_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy; sigmoid(logit) is the probability of bit 1."""
    _check_shapes(logits, targets)
    t = targets.to(logits.dtype)
    return torch.nn.functional.binary_cross_entropy_with_logits(logits, t)


def block_loss(logits: torch.Tensor, targets: torch.Tensor,
               config: LossConfig = LossConfig()) -> torch.Tensor:
    """Differentiable block error objective (soft block error rate)."""
    _check_shapes(logits, targets)
    t = targets.to(logits.dtype)
    p_bit = torch.sigmoid(logits) * t + (1.0 - torch.sigmoid(logits)) * (1.0 - t)
    p_block = p_bit.prod(dim=1)
    return -(torch.log(p_block + config.epsilon)).mean()


def total_loss(logits: torch.Tensor, targets: torch.Tensor,
               config: LossConfig = LossConfig()) -> torch.Tensor:
    """Sum of the bit-level and block-level objectives."""
    return bce_loss(logits, targets) + block_loss(logits, targets, config)


@dataclass(frozen=True)
class SchedulerConfig:
    """Cosine annealing with warm restarts: period T0 growing by tmult."""

    t0: int = 50
    tmult: int = 2
    min_lr: float = 1e-5

    def __post_init__(self):
        if self.t0 < 1 or self.tmult < 1:
            raise ConfigurationError("t0 and tmult must be >= 1")


def cosine_warm_restart_lr(step: int, base_lr: float,
                           schedule: SchedulerConfig = SchedulerConfig()) -> float:
    """Learning rate at ``step`` (0-based, typically an epoch counter).

    Within a period of length T the rate is
    min + (base - min)/2 * (1 + cos(pi * t / T)); step T is the end of the
    first period (minimum rate) and the next step starts the new period.
    """
    if step < 0:
        raise DomainError("step must be >= 0")
    t = step
    period = schedule.t0
    while t > period:
        t -= period
        period *= schedule.tmult
    return schedule.min_lr + 0.5 * (base_lr - schedule.min_lr) * (1.0 + math.cos(math.pi * t / period))
