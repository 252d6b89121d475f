"""Self-describing checkpoint container.

Layout: magic ``NPCK`` + 8-byte little-endian header length + canonical JSON
header + raw little-endian C-order array payload. The header carries the
format version, code configuration, architecture, epoch, training SNR pair,
free-form metadata, per-array (name, dtype, shape, offset) records and a
SHA-256 content digest over header-without-digest plus payload. Loading
verifies the digest; loading then saving reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .channel import NormStats
from .errors import ConfigurationError, DomainError
from .polar import CodeConfig
from .trees import NeuralCodec

MAGIC = b"NPCK"
FORMAT_VERSION = 1


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class Checkpoint:
    code: dict
    arch: dict
    epoch: int = 0
    snr_pair: tuple[float, float] | None = None
    metadata: dict = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def _header_and_payload(self) -> tuple[dict, bytes]:
        records = []
        chunks = []
        offset = 0
        for name, arr in self.arrays.items():
            arr = np.asarray(arr)
            shape = list(arr.shape)  # before ascontiguousarray, which forces ndim >= 1
            if arr.dtype.byteorder == ">":
                arr = arr.astype(arr.dtype.newbyteorder("<"))
            raw = np.ascontiguousarray(arr).tobytes(order="C")
            records.append({
                "name": name,
                "dtype": np.dtype(arr.dtype).newbyteorder("<").str,
                "shape": shape,
                "offset": offset,
                "nbytes": len(raw),
            })
            chunks.append(raw)
            offset += len(raw)
        header = {
            "format_version": self.format_version,
            "code": self.code,
            "arch": self.arch,
            "epoch": self.epoch,
            "snr_pair": list(self.snr_pair) if self.snr_pair is not None else None,
            "metadata": self.metadata,
            "arrays": records,
        }
        return header, b"".join(chunks)

    def digest(self) -> str:
        header, payload = self._header_and_payload()
        h = hashlib.sha256()
        h.update(_canonical_json(header))
        h.update(payload)
        return h.hexdigest()

    def save(self, path) -> str:
        path = Path(path)
        header, payload = self._header_and_payload()
        header["digest"] = self.digest()
        blob = _canonical_json(header)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(len(blob).to_bytes(8, "little"))
            f.write(blob)
            f.write(payload)
        return header["digest"]

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != MAGIC:
                raise DomainError(f"{path}: not a checkpoint file (bad magic)")
            hlen = int.from_bytes(f.read(8), "little")
            header = json.loads(f.read(hlen).decode())
            payload = f.read()
        if header.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"{path}: unsupported checkpoint format_version {header.get('format_version')}")
        arrays = {}
        for rec in header["arrays"]:
            raw = payload[rec["offset"]: rec["offset"] + rec["nbytes"]]
            arr = np.frombuffer(raw, dtype=np.dtype(rec["dtype"]))
            arrays[rec["name"]] = arr.reshape(rec["shape"]).copy()
        ckpt = cls(
            code=header["code"],
            arch=header["arch"],
            epoch=header["epoch"],
            snr_pair=tuple(header["snr_pair"]) if header["snr_pair"] is not None else None,
            metadata=header["metadata"],
            arrays=arrays,
        )
        expected = header.get("digest")
        actual = ckpt.digest()
        if expected != actual:
            raise DomainError(f"{path}: digest mismatch ({expected} != {actual})")
        return ckpt


def codec_to_checkpoint(codec: NeuralCodec, epoch: int = 0,
                        snr_pair: tuple[float, float] | None = None,
                        optimizers: dict | None = None,
                        rng_state: torch.Tensor | None = None,
                        metadata: dict | None = None) -> Checkpoint:
    """Capture a codec (and optionally optimizer/RNG state) as a checkpoint."""
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in codec.state_dict().items():
        arrays[f"model/{name}"] = tensor.detach().cpu().numpy()
    meta = dict(metadata or {})
    meta["norm_stats"] = codec.norm_stats.to_dict() if codec.norm_stats else None
    if optimizers:
        opt_meta = {}
        for tag, opt in optimizers.items():
            sd = opt.state_dict()
            opt_meta[tag] = {"param_groups": sd["param_groups"]}
            for idx, state in sd["state"].items():
                for key, val in state.items():
                    t = val if isinstance(val, torch.Tensor) else torch.tensor(val)
                    arrays[f"opt/{tag}/{idx}/{key}"] = t.detach().cpu().numpy()
        meta["optimizers"] = opt_meta
    if rng_state is not None:
        arrays["rng/torch"] = rng_state.numpy()
    return Checkpoint(code=codec.config.to_dict(), arch=dict(codec.arch),
                      epoch=epoch, snr_pair=snr_pair, metadata=meta, arrays=arrays)


def checkpoint_to_codec(ckpt: Checkpoint, dtype: torch.dtype = torch.float32) -> NeuralCodec:
    """Rebuild a codec from a checkpoint (weights and normalization constants)."""
    config = CodeConfig.from_dict(ckpt.code)
    arch = dict(ckpt.arch)
    codec = NeuralCodec(config, **arch).to(dtype)
    state = {}
    for name, arr in ckpt.arrays.items():
        if name.startswith("model/"):
            state[name[len("model/"):]] = torch.from_numpy(arr.copy()).to(dtype)
    codec.load_state_dict(state)
    ns = ckpt.metadata.get("norm_stats")
    if ns:
        codec.norm_stats = NormStats.from_dict(ns)
    codec.eval()
    return codec


def optimizer_state_from_checkpoint(ckpt: Checkpoint, tag: str) -> dict | None:
    """Reassemble a torch optimizer state_dict stored under ``opt/<tag>/...``."""
    opt_meta = ckpt.metadata.get("optimizers", {})
    if tag not in opt_meta:
        return None
    state: dict[int, dict] = {}
    prefix = f"opt/{tag}/"
    for name, arr in ckpt.arrays.items():
        if not name.startswith(prefix):
            continue
        idx_str, key = name[len(prefix):].split("/", 1)
        entry = state.setdefault(int(idx_str), {})
        t = torch.from_numpy(arr.copy())
        entry[key] = t
    groups = [dict(g) for g in opt_meta[tag]["param_groups"]]
    for g in groups:
        if isinstance(g.get("betas"), list):  # JSON turns the tuple into a list
            g["betas"] = tuple(g["betas"])
    return {"state": state, "param_groups": groups}
