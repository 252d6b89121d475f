"""SMART decoding: CRC-enhanced encoding, parallel multi-model decoding and
CRC-guided selection with a fallback decoder.

The CRC bits are carved out of the k information positions (payload length
k - r), so one fixed (n, k) encoder serves every ensemble member. Candidates
are scanned in the ensemble's fixed model order; the first one whose CRC
verifies wins, otherwise the fallback model's candidate is returned.
``fallback_index`` is 1-based, matching the model numbering in ensemble
files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .channel import llr_from_channel
from .crc import CRCSpec, crc_append, crc_spec, crc_verify
from .errors import ConfigurationError, DomainError
from .trees import NeuralCodec


@dataclass(frozen=True)
class EnsembleMember:
    codec: NeuralCodec
    snr_pair: tuple[float, float] | None = None
    label: str = ""


@dataclass
class EnsembleSpec:
    """Ordered decoder ensemble sharing one encoder and one CRC."""

    members: list[EnsembleMember]
    crc: CRCSpec
    fallback_index: int = 1  # 1-based position of the fallback model
    encoder_index: int | None = None  # member whose encoder transmits; default: fallback

    def __post_init__(self):
        self.crc = crc_spec(self.crc)
        if not self.members:
            raise ConfigurationError("ensemble needs at least one member")
        if not 1 <= self.fallback_index <= len(self.members):
            raise ConfigurationError(
                f"fallback_index must be in [1, {len(self.members)}], got {self.fallback_index}")
        configs = {m.codec.config for m in self.members}
        if len(configs) != 1:
            raise ConfigurationError("all ensemble members must share one CodeConfig")
        cfg = self.members[0].codec.config
        if cfg.k - self.crc.r < 1:
            raise ConfigurationError(
                f"payload length k - r = {cfg.k - self.crc.r} must be >= 1")
        if self.encoder_index is None:
            self.encoder_index = self.fallback_index

    @property
    def config(self):
        return self.members[0].codec.config

    @property
    def payload_len(self) -> int:
        return self.config.k - self.crc.r

    @property
    def encoder(self) -> NeuralCodec:
        return self.members[self.encoder_index - 1].codec

    @property
    def fallback(self) -> NeuralCodec:
        return self.members[self.fallback_index - 1].codec


@dataclass
class SmartDiagnostics:
    selected_index: int  # 1-based; 0 when the fallback was used
    crc_ok: list[bool] = field(default_factory=list)

    @property
    def fallback_used(self) -> bool:
        return self.selected_index == 0


def smart_encode(payload, spec: EnsembleSpec) -> np.ndarray:
    """CRC-append the payload and encode with the ensemble's default encoder."""
    payload = np.asarray(payload)
    if payload.ndim == 1:
        return smart_encode(payload[None, :], spec)[0]
    if payload.shape[1] != spec.payload_len:
        raise DomainError(
            f"expected payload length {spec.payload_len}, got {payload.shape[1]}")
    words = np.stack([crc_append(row, spec.crc) for row in payload])
    encoder = spec.encoder
    with torch.no_grad():
        x = encoder.encode(torch.as_tensor(words))
    return x.cpu().numpy()


def select_candidate(candidates: list[np.ndarray], spec: EnsembleSpec,
                     fallback_candidate: np.ndarray | None = None):
    """CRC-guided selection over a fixed-order candidate list.

    Returns ``(payload, diagnostics)``: the first candidate (in list order)
    whose CRC verifies, stripped of its check bits; if none verifies, the
    fallback candidate (by default the fallback model's entry).
    """
    crc = spec.crc
    ok = [crc_verify(c, crc) for c in candidates]
    diag = SmartDiagnostics(selected_index=0, crc_ok=ok)
    for i, good in enumerate(ok):
        if good:
            diag.selected_index = i + 1
            return candidates[i][: -crc.r].copy(), diag
    chosen = fallback_candidate if fallback_candidate is not None \
        else candidates[spec.fallback_index - 1]
    return chosen[: -crc.r].copy(), diag


def smart_decode(y, spec: EnsembleSpec, sigma: float):
    """Decode a received vector with every ensemble member and select by CRC.

    ``sigma`` is the channel noise standard deviation used for LLR formation.
    Returns ``(payload, diagnostics)`` for a single vector, or
    ``(payloads, list_of_diagnostics)`` for a (B, n) batch.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        payloads, diags = smart_decode(y[None, :], spec, sigma)
        return payloads[0], diags[0]
    if not np.isfinite(y).all():
        raise DomainError("received vector contains NaN or Inf")
    llr = llr_from_channel(y, sigma)
    llr_t = torch.as_tensor(llr)
    candidate_sets = []
    for member in spec.members:
        codec = member.codec
        codec.eval()
        with torch.no_grad():
            bits, _ = codec.decode(llr_t)
        candidate_sets.append(bits.cpu().numpy().astype(np.uint8))
    payloads = np.empty((y.shape[0], spec.payload_len), dtype=np.uint8)
    diags = []
    for row in range(y.shape[0]):
        payload, diag = select_candidate(
            [cands[row] for cands in candidate_sets], spec)
        payloads[row] = payload
        diags.append(diag)
    return payloads, diags
