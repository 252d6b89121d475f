import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuralpolar.crc import CRC_PRESETS, CRCSpec, crc_append, crc_remainder, crc_spec, crc_verify
from neuralpolar.errors import ConfigurationError, DomainError

G3 = CRC_PRESETS["crc3"]
G8 = CRC_PRESETS["crc8"]


def poly_mod_oracle(payload, spec):
    # long division over integer polynomials reduced mod 2, highest degree first
    import numpy.polynomial.polynomial as P

    deg = len(payload) - 1
    coeffs = np.zeros(deg + spec.r + 1, dtype=np.int64)
    for i, bit in enumerate(payload):  # payload[i] is coefficient of x^(deg - i + r)
        coeffs[deg - i + spec.r] = bit
    divisor = np.array(spec.poly, dtype=np.int64)
    while len(coeffs) >= len(divisor) and coeffs.any():
        lead = len(coeffs) - 1
        if coeffs[lead] == 0:
            coeffs = coeffs[:-1]
            continue
        shift = lead - (len(divisor) - 1)
        if shift < 0:
            break
        coeffs[shift: shift + len(divisor)] = (coeffs[shift: shift + len(divisor)] + divisor) % 2
    rem = np.zeros(spec.r, dtype=np.uint8)
    for d in range(min(spec.r, len(coeffs))):
        rem[d] = coeffs[d] % 2
    return rem[::-1]  # check bits appended lowest-degree-last


def test_presets_match_polynomials():
    assert G3.poly == (1, 1, 0, 1)  # 1 + x + x^3
    assert G8.poly == (1, 1, 0, 1, 0, 1, 0, 0, 1)  # 1 + x + x^3 + x^5 + x^8
    assert crc_spec("crc3") is G3
    with pytest.raises(ConfigurationError):
        crc_spec("crc5")


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        CRCSpec(r=3, poly=(0, 1, 0, 1))  # constant term 0
    with pytest.raises(ConfigurationError):
        CRCSpec(r=3, poly=(1, 1, 1))  # wrong length


def test_all_zero_payload():
    out = crc_append(np.zeros(10, dtype=int), G3)
    np.testing.assert_array_equal(out, np.zeros(13))


def test_single_bit_payload_hand_division():
    # payload (1): remainder of x^3 mod (x^3 + x + 1) is x + 1 -> bits (0, 1, 1)
    np.testing.assert_array_equal(crc_remainder(np.array([1]), G3), [0, 1, 1])


def test_remainder_matches_long_division_oracle():
    rng = np.random.default_rng(0)
    for spec in (G3, G8):
        for _ in range(200):
            payload = rng.integers(0, 2, size=rng.integers(1, 40))
            np.testing.assert_array_equal(
                crc_remainder(payload, spec), poly_mod_oracle(payload, spec))


def test_append_verify_round_trip():
    rng = np.random.default_rng(1)
    for spec in (G3, G8):
        payloads = rng.integers(0, 2, size=(10_000, 12))
        assert all(crc_verify(crc_append(p, spec), spec) for p in payloads)


def test_every_single_bit_flip_detected():
    rng = np.random.default_rng(2)
    for spec in (G3, G8):
        word = crc_append(rng.integers(0, 2, size=29), spec)
        for i in range(word.size):
            flipped = word.copy()
            flipped[i] ^= 1
            assert not crc_verify(flipped, spec), f"missed flip at {i}"


def test_random_word_false_accept_rate():
    rng = np.random.default_rng(3)
    for spec in (G3, G8):
        trials = 100_000
        words = rng.integers(0, 2, size=(trials, 24), dtype=np.uint8)
        div = spec.divisor_msb_first
        hits = 0
        for w in words:
            work = np.concatenate([w[: -spec.r], np.zeros(spec.r, dtype=np.uint8)])
            for i in range(w.size - spec.r):
                if work[i]:
                    work[i: i + spec.r + 1] ^= div
            hits += int(np.array_equal(work[-spec.r:], w[-spec.r:]))
        p = 2.0**-spec.r
        se = np.sqrt(p * (1 - p) / trials)
        assert abs(hits / trials - p) < 3 * se


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**30 - 1), st.integers(0, 2**30 - 1))
def test_linearity_over_gf2(length, seed_a, seed_b):
    rng_a = np.random.default_rng(seed_a)
    rng_b = np.random.default_rng(seed_b)
    a = rng_a.integers(0, 2, size=length)
    b = rng_b.integers(0, 2, size=length)
    for spec in (G3, G8):
        np.testing.assert_array_equal(
            crc_remainder(a ^ b, spec),
            crc_remainder(a, spec) ^ crc_remainder(b, spec))


def test_verify_rejects_short_candidate():
    with pytest.raises(DomainError):
        crc_verify(np.array([1, 0, 1]), G3)
    with pytest.raises(DomainError):
        crc_remainder(np.array([], dtype=int), G3)
