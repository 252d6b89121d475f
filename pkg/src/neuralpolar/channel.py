"""AWGN channel simulation, SNR conventions and LLR formation.

SNR convention: SNR = 1/sigma^2 with unit signal power (per real dimension),
so sigma = 10^(-snr_db/20). This is not Eb/N0; every curve and training SNR
in this package uses the same convention. BPSK bit map: 0 -> +1, 1 -> -1.

``normalize_power`` and ``awgn`` accept both numpy arrays and torch tensors;
the training loop keeps everything inside the autograd graph while the
evaluation harness stays in numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError


def snr_db_to_sigma(snr_db: float) -> float:
    """Noise standard deviation per real dimension for SNR = 1/sigma^2."""
    if not np.isfinite(snr_db):
        raise DomainError("snr_db must be finite")
    return float(10.0 ** (-snr_db / 20.0))


def sigma_to_snr_db(sigma: float) -> float:
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return float(-20.0 * np.log10(sigma))


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel at a fixed SNR with a seeded noise stream."""

    snr_db: float
    seed: int = 0

    @property
    def sigma(self) -> float:
        return snr_db_to_sigma(self.snr_db)


@dataclass(frozen=True)
class NormStats:
    """Shift/scale recorded by normalize_power for reuse at inference."""

    mean: float
    scale: float

    def apply(self, x):
        return (x - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean, "scale": self.scale}

    @classmethod
    def from_dict(cls, d) -> "NormStats":
        return cls(mean=float(d["mean"]), scale=float(d["scale"]))


def normalize_power(codewords, stats: NormStats | None = None):
    """Shift/scale a batch to zero mean and unit average power.

    Returns ``(normalized, stats)``. With ``stats`` given, applies the frozen
    constants instead of batch statistics (inference path). Statistics are
    scalars over the whole batch.
    """
    if stats is not None:
        return stats.apply(codewords), stats
    mean = codewords.mean()
    centered = codewords - mean
    scale = (centered**2).mean() ** 0.5
    mean_val, scale_val = (float(v.detach()) if hasattr(v, "detach") else float(v)
                           for v in (mean, scale))
    if scale_val < 1e-12:
        raise DegenerateInputError("batch has (near-)zero variance; cannot normalize power")
    return centered / scale, NormStats(mean=mean_val, scale=scale_val)


def awgn(x, config: ChannelConfig):
    """y = x + z with z i.i.d. N(0, sigma^2); deterministic for a fixed seed."""
    rng = np.random.default_rng(config.seed)
    x = np.asarray(x, dtype=float)
    return x + config.sigma * rng.standard_normal(x.shape)


def awgn_noise_like(x, sigma: float, generator=None):
    """Torch-side AWGN: returns x + sigma * standard normal drawn from ``generator``."""
    import torch

    z = torch.empty_like(x).normal_(mean=0.0, std=1.0, generator=generator)
    return x + sigma * z


def llr_from_channel(y, sigma: float):
    """Channel LLRs L = 2y/sigma^2 for unit-power BPSK (0 -> +1, 1 -> -1)."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return (2.0 / (sigma * sigma)) * y
