"""Neural polar coding laboratory.

Classical polar/SC baseline, learned kernel encoder/decoder trees with an
attention-enhanced successive-cancellation decoder, a joint bit/block error
training objective with two-phase curriculum, CRC-guided multi-model (SMART)
decoding, and a Monte-Carlo BER/BLER evaluation harness.
"""

__version__ = "0.1.0"

from .polar import CodeConfig, build_info_set, polar_transform, sc_decode
from .channel import ChannelConfig, snr_db_to_sigma, awgn, llr_from_channel, normalize_power
from .crc import CRCSpec, crc_append, crc_verify

__all__ = [
    "__version__",
    "CodeConfig",
    "build_info_set",
    "polar_transform",
    "sc_decode",
    "ChannelConfig",
    "snr_db_to_sigma",
    "awgn",
    "llr_from_channel",
    "normalize_power",
    "CRCSpec",
    "crc_append",
    "crc_verify",
]
