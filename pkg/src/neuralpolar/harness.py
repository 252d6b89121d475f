"""Monte-Carlo BER/BLER estimation, distance analysis and sweep utilities.

Every estimate is reproducible: the noise and message stream for SNR point i
and batch b derives from ``SeedSequence([seed, i, b])``, so results are
independent of batching and can be merged across workers in any order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .channel import snr_db_to_sigma
from .errors import ConfigurationError, DomainError
from .polar import CodeConfig, encode_message, sc_decode_batch
from .smart import EnsembleSpec, smart_decode
from .trees import NeuralCodec

_WILSON_Z = 1.959963984540054  # 95% normal quantile


def wilson_interval(errors: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class ErrorStats:
    """Monte-Carlo error counters for one SNR point."""

    snr_db: float
    blocks_sent: int
    bit_errors: int
    block_errors: int
    bits_per_block: int
    decoder_id: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.block_errors > self.blocks_sent:
            raise DomainError("block_errors cannot exceed blocks_sent")
        if self.bit_errors > self.blocks_sent * self.bits_per_block:
            raise DomainError("bit_errors cannot exceed blocks_sent * bits_per_block")

    @property
    def ber(self) -> float:
        total = self.blocks_sent * self.bits_per_block
        return self.bit_errors / total if total else 0.0

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks_sent if self.blocks_sent else 0.0

    @property
    def bler_ci(self) -> tuple[float, float]:
        return wilson_interval(self.block_errors, self.blocks_sent)

    def csv_row(self) -> list:
        lo, hi = self.bler_ci
        return [self.snr_db, self.blocks_sent, self.bit_errors, self.block_errors,
                self.ber, self.bler, lo, hi, self.decoder_id, self.seed]


CSV_COLUMNS = ["snr_db", "blocks", "bit_errors", "block_errors", "ber", "bler",
               "ci_low", "ci_high", "decoder_id", "seed"]


# --- codec adapters -----------------------------------------------------------

class ScPolarCodec:
    """Classical polar code with SC decoding over BPSK."""

    def __init__(self, config: CodeConfig, rule: str = "tanh"):
        self.config = config
        self.rule = rule
        self.payload_bits = config.k
        self.decoder_id = f"sc-{rule}" if rule != "tanh" else "sc"

    def encode(self, bits: np.ndarray) -> np.ndarray:
        x = encode_message(bits, self.config)
        return 1.0 - 2.0 * x.astype(float)

    def decode(self, y: np.ndarray, sigma: float) -> np.ndarray:
        llr = (2.0 / sigma**2) * y
        return sc_decode_batch(llr, self.config, rule=self.rule)


class NeuralCodecAdapter:
    """Numpy-facing wrapper around a trained NeuralCodec."""

    def __init__(self, codec: NeuralCodec, decoder_id: str = "neural"):
        if codec.norm_stats is None:
            raise ConfigurationError("codec must be calibrated before evaluation")
        codec.eval()
        self.codec = codec
        self.payload_bits = codec.config.k
        self.decoder_id = decoder_id

    def encode(self, bits: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = self.codec.encode(torch.as_tensor(np.ascontiguousarray(bits)))
        return x.cpu().numpy()

    def decode(self, y: np.ndarray, sigma: float) -> np.ndarray:
        llr = (2.0 / sigma**2) * y
        with torch.no_grad():
            bits, _ = self.codec.decode(torch.as_tensor(llr))
        return bits.cpu().numpy().astype(np.uint8)


class SmartCodecAdapter:
    """SMART ensemble system: CRC payload encoding plus CRC-guided decoding."""

    def __init__(self, spec: EnsembleSpec, decoder_id: str = "smart"):
        self.spec = spec
        self.payload_bits = spec.payload_len
        self.decoder_id = decoder_id

    def encode(self, bits: np.ndarray) -> np.ndarray:
        from .smart import smart_encode

        return smart_encode(bits, self.spec)

    def decode(self, y: np.ndarray, sigma: float) -> np.ndarray:
        payloads, _ = smart_decode(y, self.spec, sigma)
        return payloads


class UncodedCodec:
    """Raw BPSK symbols, one block = ``bits`` symbols; baseline calibration aid."""

    def __init__(self, bits: int = 1000):
        self.payload_bits = bits
        self.decoder_id = "uncoded"

    def encode(self, bits: np.ndarray) -> np.ndarray:
        return 1.0 - 2.0 * bits.astype(float)

    def decode(self, y: np.ndarray, sigma: float) -> np.ndarray:
        return (y < 0).astype(np.uint8)


# --- Monte-Carlo loops ---------------------------------------------------------

def _snr_seed_words(snr_db: float) -> list[int]:
    bits = int(np.float64(snr_db).view(np.uint64))
    return [bits >> 32, bits & 0xFFFFFFFF]


def run_ber_bler(codec, snr_db_list, min_block_errors: int = 100,
                 max_blocks: int = 100_000, seed: int = 0,
                 batch_blocks: int = 1024, noiseless: bool = False) -> list[ErrorStats]:
    """Estimate BER/BLER at each SNR until enough block errors accumulate.

    ``codec`` provides payload_bits, encode(bits) and decode(y, sigma). The
    stream for batch b of an SNR point derives from (seed, snr value, b), so
    SNR points are independent of list order and may run in parallel. With
    ``noiseless`` the channel adds no noise (LLR scale uses a tiny sigma);
    useful as a sanity limit.
    """
    if min_block_errors < 1:
        raise ConfigurationError("min_block_errors must be >= 1")
    results = []
    kp = codec.payload_bits
    for snr_db in snr_db_list:
        sigma = snr_db_to_sigma(snr_db)
        sigma_llr = 1e-3 if noiseless else sigma
        blocks = bit_errs = block_errs = batch_idx = 0
        while blocks < max_blocks and block_errs < min_block_errors:
            b = min(batch_blocks, max_blocks - blocks)
            rng = np.random.default_rng(
                np.random.SeedSequence([seed] + _snr_seed_words(snr_db) + [batch_idx]))
            bits = rng.integers(0, 2, size=(b, kp), dtype=np.uint8)
            x = codec.encode(bits)
            noise = 0.0 if noiseless else sigma * rng.standard_normal(x.shape)
            decoded = codec.decode(x + noise, sigma_llr)
            errs = decoded.astype(np.uint8) != bits
            bit_errs += int(errs.sum())
            block_errs += int(errs.any(axis=1).sum())
            blocks += b
            batch_idx += 1
        results.append(ErrorStats(
            snr_db=float(snr_db), blocks_sent=blocks, bit_errors=bit_errs,
            block_errors=block_errs, bits_per_block=kp,
            decoder_id=getattr(codec, "decoder_id", ""), seed=seed))
    return results


# --- distance analysis ----------------------------------------------------------

@dataclass(frozen=True)
class DistanceHistogram:
    sample_count: int
    pair_count: int
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float

    def __post_init__(self):
        if int(self.counts.sum()) != self.pair_count:
            raise DomainError("histogram counts must sum to the pair count")


def _pair_distances(codewords: np.ndarray, rng, max_pairs: int) -> np.ndarray:
    s = codewords.shape[0]
    total = s * (s - 1) // 2
    if total <= max_pairs:
        ii, jj = np.triu_indices(s, k=1)
    else:
        ii = rng.integers(0, s, size=max_pairs)
        jj = rng.integers(0, s, size=max_pairs)
        resample = ii == jj
        while resample.any():
            jj[resample] = rng.integers(0, s, size=int(resample.sum()))
            resample = ii == jj
    diff = codewords[ii] - codewords[jj]
    return np.sqrt((diff**2).sum(axis=1) / codewords.shape[1])


def distance_histogram(codewords: np.ndarray, seed: int = 0, bins: int = 50,
                       max_pairs: int = 1_000_000) -> DistanceHistogram:
    """Histogram of pairwise Euclidean distances normalized by sqrt(n)."""
    if codewords.shape[0] < 2:
        raise DomainError("need at least two codewords")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    d = _pair_distances(codewords, rng, max_pairs)
    counts, edges = np.histogram(d, bins=bins)
    return DistanceHistogram(
        sample_count=codewords.shape[0], pair_count=d.size, bin_edges=edges,
        counts=counts, mean=float(d.mean()), variance=float(d.var()))


def pairwise_distance_analysis(encode_fn, payload_bits: int, n: int,
                               sample_count: int = 10_000, seed: int = 0,
                               bins: int = 50, max_pairs: int = 1_000_000):
    """Distance distribution of sampled codewords plus a Gaussian reference.

    ``encode_fn`` maps a (S, payload_bits) bit matrix to (S, n) codewords.
    Returns ``(code_histogram, gaussian_reference_histogram)``; the reference
    draws unit-power Gaussian vectors of the same length.
    """
    if sample_count < 2:
        raise DomainError("sample_count must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    bits = rng.integers(0, 2, size=(sample_count, payload_bits), dtype=np.uint8)
    codewords = np.asarray(encode_fn(bits), dtype=float)
    ref = rng.standard_normal((sample_count, n))
    return (distance_histogram(codewords, seed=seed, bins=bins, max_pairs=max_pairs),
            distance_histogram(ref, seed=seed + 1, bins=bins, max_pairs=max_pairs))


# --- sweeps ---------------------------------------------------------------------

def convergence_sweep(checkpoint_paths, snr_db_list, seed: int = 0,
                      min_block_errors: int = 100, max_blocks: int = 20_000,
                      batch_blocks: int = 1024) -> list[dict]:
    """Evaluate a list of training checkpoints; rows of (epoch, snr, ber, bler)."""
    from .checkpoint import Checkpoint, checkpoint_to_codec

    rows = []
    for path in checkpoint_paths:
        ckpt = Checkpoint.load(path)
        codec = checkpoint_to_codec(ckpt)
        adapter = NeuralCodecAdapter(codec, decoder_id=f"epoch{ckpt.epoch}")
        for stats in run_ber_bler(adapter, snr_db_list, min_block_errors=min_block_errors,
                                  max_blocks=max_blocks, seed=seed,
                                  batch_blocks=batch_blocks):
            rows.append({"epoch": ckpt.epoch, "snr_db": stats.snr_db,
                         "ber": stats.ber, "bler": stats.bler,
                         "blocks": stats.blocks_sent})
    return rows


def snr_mismatch_sweep(models: list[tuple[str, object]], snr_db_list, seed: int = 0,
                       min_block_errors: int = 100, max_blocks: int = 20_000,
                       batch_blocks: int = 1024):
    """Cross-evaluate labelled models at every test SNR.

    Returns ``(table, report)``: ``table[label][snr]`` holds ErrorStats and the
    report ranks models per SNR (emitted for inspection, not asserted).
    """
    table: dict[str, dict[float, ErrorStats]] = {}
    for label, adapter in models:
        stats = run_ber_bler(adapter, snr_db_list, min_block_errors=min_block_errors,
                             max_blocks=max_blocks, seed=seed, batch_blocks=batch_blocks)
        table[label] = {s.snr_db: s for s in stats}
    report_lines = []
    for snr in snr_db_list:
        ranked = sorted(table, key=lambda lbl: table[lbl][float(snr)].ber)
        report_lines.append(
            f"snr {snr:+.1f} dB: " + " < ".join(
                f"{lbl} (ber {table[lbl][float(snr)].ber:.3g})" for lbl in ranked))
    return table, "\n".join(report_lines)


def snr_at_ber(stats_list: list[ErrorStats], target_ber: float) -> float:
    """SNR (dB) where interpolated log-BER crosses the target; for dB-gap checks."""
    pts = sorted((s.snr_db, s.ber) for s in stats_list)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if (b0 >= target_ber >= b1) and b0 > 0 and b1 > 0:
            if b0 == b1:
                return s0
            frac = (np.log10(b0) - np.log10(target_ber)) / (np.log10(b0) - np.log10(b1))
            return s0 + frac * (s1 - s0)
    raise DomainError(f"target BER {target_ber} not bracketed by the sweep")
