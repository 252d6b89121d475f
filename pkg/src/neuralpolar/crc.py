"""Cyclic redundancy checks for CRC-guided ensemble decoding.

Bit order convention, fixed for checkpoint compatibility: the payload enters
the division register MSB-first, and the r check bits are appended
lowest-degree-last (coefficient of x^(r-1) first, x^0 last).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class CRCSpec:
    """CRC with r check bits; ``poly`` holds coefficients of 1, x, ..., x^r."""

    r: int
    poly: tuple[int, ...]

    def __post_init__(self):
        if len(self.poly) != self.r + 1:
            raise ConfigurationError(f"poly must have degree r={self.r} (r+1 coefficients)")
        if self.poly[0] != 1 or self.poly[-1] != 1:
            raise ConfigurationError("constant and leading coefficients must be 1")
        if any(c not in (0, 1) for c in self.poly):
            raise ConfigurationError("poly coefficients must be binary")

    @property
    def divisor_msb_first(self) -> np.ndarray:
        return np.asarray(self.poly[::-1], dtype=np.uint8)


# Named presets: g3(x) = 1 + x + x^3 and g8(x) = 1 + x + x^3 + x^5 + x^8.
CRC_PRESETS = {
    "crc3": CRCSpec(r=3, poly=(1, 1, 0, 1)),
    "crc8": CRCSpec(r=8, poly=(1, 1, 0, 1, 0, 1, 0, 0, 1)),
}


def crc_spec(name_or_spec) -> CRCSpec:
    if isinstance(name_or_spec, CRCSpec):
        return name_or_spec
    try:
        return CRC_PRESETS[name_or_spec]
    except KeyError:
        raise ConfigurationError(
            f"unknown CRC preset {name_or_spec!r}; known: {sorted(CRC_PRESETS)}"
        ) from None


def _as_bits(v) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
        raise DomainError("expected a 1-D binary vector")
    return arr.astype(np.uint8)


def crc_remainder(payload, spec: CRCSpec) -> np.ndarray:
    """Check bits: remainder of payload * x^r modulo poly over GF(2)."""
    payload = _as_bits(payload)
    if payload.size == 0:
        raise DomainError("payload must be nonempty")
    work = np.concatenate([payload, np.zeros(spec.r, dtype=np.uint8)])
    div = spec.divisor_msb_first
    for i in range(payload.size):
        if work[i]:
            work[i : i + spec.r + 1] ^= div
    return work[-spec.r :]


def crc_append(payload, spec: CRCSpec) -> np.ndarray:
    """Systematic CRC encoding: payload followed by its r check bits."""
    payload = _as_bits(payload)
    return np.concatenate([payload, crc_remainder(payload, spec)])


def crc_verify(candidate, spec: CRCSpec) -> bool:
    """True iff the trailing r bits equal the recomputed check bits."""
    candidate = _as_bits(candidate)
    if candidate.size <= spec.r:
        raise DomainError(f"candidate must be longer than r={spec.r} bits")
    expected = crc_remainder(candidate[: -spec.r], spec)
    return bool(np.array_equal(expected, candidate[-spec.r :]))
