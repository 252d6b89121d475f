"""Classical polar code machinery.

Transforms, information-set construction via Gaussian-approximation density
evolution, and successive-cancellation decoding. This is both the baseline
codec and the linear-augmentation path inside the neural kernels.

Conventions (used consistently everywhere in this package):
  - natural (non-bit-reversed) indexing;
  - row-vector convention: the transform is ``x = u @ G`` with ``G`` the
    Kronecker power of the 2x2 kernel [[1, 0], [1, 1]] (so for n=2,
    ``x = (u0 ^ u1, u1)``);
  - LLR sign: positive means bit 0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

ARIKAN_KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)


def polar_kernel_matrix(ell: int) -> np.ndarray:
    """Return the ell x ell binary polar matrix (Kronecker power of the 2x2 kernel)."""
    if ell < 2 or (ell & (ell - 1)) != 0:
        raise ConfigurationError(f"kernel size must be a power of 2 >= 2, got {ell}")
    g = np.array([[1]], dtype=np.uint8)
    for _ in range(int(np.log2(ell))):
        g = np.kron(g, ARIKAN_KERNEL)
    return g


@dataclass(frozen=True)
class CodeConfig:
    """Code geometry: block length, message length, kernel size and bit sets.

    ``info_set`` holds the k message-carrying indices (sorted); all remaining
    indices are frozen to zero. ``depth`` is the kernel-tree depth, with
    ``ell ** depth == n``.
    """

    n: int
    k: int
    ell: int
    depth: int
    info_set: tuple[int, ...]
    design_snr_db: float = -2.0
    frozen_set: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.k < 0 or self.k > self.n:
            raise ConfigurationError(f"need 0 <= k <= n, got n={self.n} k={self.k}")
        if self.ell < 2 or (self.ell & (self.ell - 1)) != 0:
            raise ConfigurationError(f"ell must be a power of 2, got {self.ell}")
        if self.ell**self.depth != self.n:
            raise ConfigurationError(
                f"ell**depth must equal n: {self.ell}**{self.depth} != {self.n}"
            )
        info = tuple(sorted(self.info_set))
        if len(info) != self.k or any(i < 0 or i >= self.n for i in info):
            raise ConfigurationError("info_set must contain k distinct indices in [0, n)")
        if len(set(info)) != self.k:
            raise ConfigurationError("info_set has repeated indices")
        object.__setattr__(self, "info_set", info)
        frozen = tuple(i for i in range(self.n) if i not in set(info))
        object.__setattr__(self, "frozen_set", frozen)

    @property
    def info_array(self) -> np.ndarray:
        return np.asarray(self.info_set, dtype=np.int64)

    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.info_array] = False
        return mask

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "ell": self.ell,
            "depth": self.depth,
            "info_set": list(self.info_set),
            "design_snr_db": self.design_snr_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodeConfig":
        return cls(
            n=int(d["n"]),
            k=int(d["k"]),
            ell=int(d["ell"]),
            depth=int(d["depth"]),
            info_set=tuple(int(i) for i in d["info_set"]),
            design_snr_db=float(d.get("design_snr_db", -2.0)),
        )


# --- Gaussian-approximation density evolution -------------------------------

def _phi(x: np.ndarray) -> np.ndarray:
    # Chung et al. approximation of E[tanh(L/2)] complement for L ~ N(x, 2x).
    x = np.asarray(x, dtype=float)
    small = np.exp(0.0218 - 0.4527 * np.power(np.maximum(x, 1e-30), 0.86))
    big = np.sqrt(np.pi / np.maximum(x, 1e-30)) * np.exp(-x / 4.0) * (1.0 - 10.0 / (7.0 * np.maximum(x, 1e-30)))
    out = np.where(x < 10.0, small, big)
    return np.where(x <= 0, 1.0, np.clip(out, 0.0, 1.0))


def _phi_inv(y: float) -> float:
    # phi is monotone decreasing; invert by bisection.
    if y >= 1.0:
        return 0.0
    lo, hi = 1e-12, 1.0
    while _phi(hi) > y:
        hi *= 2.0
        if hi > 1e12:
            return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ga_bit_channel_means(n: int, design_snr_db: float) -> np.ndarray:
    """LLR means of the n synthetic bit channels under Gaussian approximation.

    The physical channel is BPSK over AWGN with unit signal power and
    SNR = 1/sigma^2, so the channel LLR mean is 2/sigma^2. Larger mean means
    a more reliable bit channel.
    """
    sigma2 = 10.0 ** (-design_snr_db / 10.0)
    means = np.array([2.0 / sigma2])
    levels = int(np.log2(n))
    for _ in range(levels):
        nxt = np.empty(means.size * 2)
        for j, mu in enumerate(means):
            # check-node (degraded) child first: natural index order
            nxt[2 * j] = _phi_inv(1.0 - (1.0 - _phi(mu)) ** 2)
            nxt[2 * j + 1] = 2.0 * mu
        means = nxt
    return means


def build_info_set(n: int, k: int, ell: int, design_snr_db: float = -2.0) -> CodeConfig:
    """Construct a CodeConfig whose info_set holds the k most reliable indices.

    Reliability ordering comes from Gaussian-approximation density evolution
    at ``design_snr_db``. Deterministic for fixed inputs; ties are broken
    toward the higher index.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"n must be a power of 2, got {n}")
    if not 0 <= k <= n:
        raise ConfigurationError(f"need 0 <= k <= n, got k={k}")
    if ell < 2 or (ell & (ell - 1)) != 0:
        raise ConfigurationError(f"ell must be a power of 2, got {ell}")
    depth = 0
    m = 1
    while m < n:
        m *= ell
        depth += 1
    if m != n:
        raise ConfigurationError(f"n={n} is not a power of ell={ell}")

    means = ga_bit_channel_means(n, design_snr_db)
    order = np.lexsort((-np.arange(n), -means))  # by mean desc, ties -> higher index
    info = tuple(sorted(int(i) for i in order[:k]))
    return CodeConfig(n=n, k=k, ell=ell, depth=depth, info_set=info, design_snr_db=design_snr_db)


# --- Transforms --------------------------------------------------------------

def _check_binary(u: np.ndarray) -> np.ndarray:
    arr = np.asarray(u)
    if not np.isin(arr, (0, 1)).all():
        raise DomainError("polar_transform expects binary (0/1) input")
    return arr.astype(np.uint8)


def polar_transform(u_bits: np.ndarray) -> np.ndarray:
    """GF(2) polar transform x = u @ G, vectorized over leading axes.

    The last axis is the block axis and must have power-of-two length.
    Involutory: applying twice returns the input.
    """
    x = _check_binary(u_bits).copy()
    n = x.shape[-1]
    if n & (n - 1) != 0 or n < 1:
        raise DomainError(f"block length must be a power of 2, got {n}")
    lead = x.shape[:-1]
    stride = 1
    while stride < n:
        y = x.reshape(*lead, n // (2 * stride), 2, stride)
        y[..., 0, :] ^= y[..., 1, :]
        x = y.reshape(*lead, n)
        stride *= 2
    return x


def encode_message(bits: np.ndarray, config: CodeConfig) -> np.ndarray:
    """Embed message bits at info positions (frozen = 0) and polar-transform."""
    bits = _check_binary(bits)
    if bits.shape[-1] != config.k:
        raise DomainError(f"expected {config.k} message bits, got {bits.shape[-1]}")
    u = np.zeros(bits.shape[:-1] + (config.n,), dtype=np.uint8)
    u[..., config.info_array] = bits
    return polar_transform(u)


# --- Successive cancellation --------------------------------------------------

_ATANH_CLIP = 1.0 - 1e-15


def _f_tanh(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    prod = np.clip(np.tanh(a / 2.0) * np.tanh(b / 2.0), -_ATANH_CLIP, _ATANH_CLIP)
    return 2.0 * np.arctanh(prod)


def _f_minsum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def sc_decode_batch(llr: np.ndarray, config: CodeConfig, rule: str = "tanh") -> np.ndarray:
    """Batched SC decoding: llr of shape (B, n) -> message bits (B, k).

    ``rule`` selects the check-node update: "tanh" (exact) or "minsum".
    """
    llr = np.asarray(llr, dtype=float)
    if llr.ndim != 2 or llr.shape[1] != config.n:
        raise DomainError(f"expected llr shape (B, {config.n}), got {llr.shape}")
    if not np.isfinite(llr).all():
        raise DomainError("llr contains NaN or Inf")
    if rule == "tanh":
        f = _f_tanh
    elif rule == "minsum":
        f = _f_minsum
    else:
        raise ConfigurationError(f"unknown check-node rule {rule!r}")

    frozen = config.frozen_mask()

    def recurse(l: np.ndarray, offset: int):
        m = l.shape[1]
        if m == 1:
            if frozen[offset]:
                u = np.zeros((l.shape[0], 1), dtype=np.uint8)
            else:
                u = (l[:, :1] < 0).astype(np.uint8)
            return u, u
        half = m // 2
        l1, l2 = l[:, :half], l[:, half:]
        u_left, x_left = recurse(f(l1, l2), offset)
        l_right = l2 + (1.0 - 2.0 * x_left) * l1
        u_right, x_right = recurse(l_right, offset + half)
        u = np.concatenate([u_left, u_right], axis=1)
        x = np.concatenate([x_left ^ x_right, x_right], axis=1)
        return u, x

    u_hat, _ = recurse(llr, 0)
    return u_hat[:, config.info_array]


def sc_decode(llr: np.ndarray, config: CodeConfig, rule: str = "tanh") -> np.ndarray:
    """SC-decode a single LLR vector of length n into k message bits."""
    llr = np.asarray(llr, dtype=float)
    if llr.ndim != 1:
        raise DomainError("sc_decode expects a 1-D LLR vector; use sc_decode_batch for batches")
    return sc_decode_batch(llr[None, :], config, rule=rule)[0]
