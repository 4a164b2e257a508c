"""Binary checkpoints for pretrained models.

Layout (little-endian): magic "SKPT", u32 format version, u32 config
length + `key = value` utf-8 config block covering every encoder and
decoder config field plus the pretraining stream, u32 tensor count,
then per-tensor records of (u32 name length, name bytes, u32 rank,
u32 dims..., raw float32 data).  Writes are atomic (temp + rename);
loading validates magic, version and shape bookkeeping with distinct
error types.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .model import CloudEncoder, DecoderConfig, EncoderConfig, FoldingDecoder

MAGIC = b"SKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    """Configs, pretraining stream tag, and named float32 tensors."""

    encoder_cfg: EncoderConfig
    decoder_cfg: DecoderConfig
    stream: str
    tensors: Dict[str, np.ndarray]


def _config_text(ckpt: Checkpoint) -> str:
    e, d = ckpt.encoder_cfg, ckpt.decoder_cfg
    lines = [
        f"encoder.k_neighbors = {e.k_neighbors}",
        f"encoder.layer_widths = {','.join(str(w) for w in e.layer_widths)}",
        f"encoder.latent_dim = {e.latent_dim}",
        f"encoder.in_channels = {e.in_channels}",
        f"encoder.normalize = {'true' if e.normalize else 'false'}",
        f"decoder.output_points = {d.output_points}",
        f"decoder.grid_side = {d.grid_side}",
        f"decoder.fold_widths = {','.join(str(w) for w in d.fold_widths)}",
        f"decoder.output_channels = {d.output_channels}",
        f"stream = {ckpt.stream}",
    ]
    return "\n".join(lines) + "\n"


def _parse_config(text: str):
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CheckpointCorruptError(f"bad config line {line!r}")
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    try:
        enc = EncoderConfig(
            k_neighbors=int(kv["encoder.k_neighbors"]),
            layer_widths=tuple(int(w) for w in kv["encoder.layer_widths"].split(",")),
            latent_dim=int(kv["encoder.latent_dim"]),
            in_channels=int(kv["encoder.in_channels"]),
            normalize=kv["encoder.normalize"] == "true",
        )
        dec = DecoderConfig(
            output_points=int(kv["decoder.output_points"]),
            grid_side=int(kv["decoder.grid_side"]),
            fold_widths=tuple(int(w) for w in kv["decoder.fold_widths"].split(",")),
            output_channels=int(kv["decoder.output_channels"]),
        )
        stream = kv["stream"]
    except (KeyError, ValueError) as exc:
        raise CheckpointCorruptError(f"bad config block: {exc}") from None
    return enc, dec, stream


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Serialize atomically; float32 data, names in sorted order."""
    config = _config_text(ckpt).encode("utf-8")
    names = sorted(ckpt.tensors)
    out_dir = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".skpt-", dir=out_dir)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", VERSION))
            fh.write(struct.pack("<I", len(config)))
            fh.write(config)
            fh.write(struct.pack("<I", len(names)))
            for name in names:
                data = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
                raw_name = name.encode("utf-8")
                fh.write(struct.pack("<I", len(raw_name)))
                fh.write(raw_name)
                fh.write(struct.pack("<I", data.ndim))
                fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
                fh.write(data.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    view = memoryview(blob)
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointCorruptError(f"truncated file while reading {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(4, "magic")) != MAGIC:
        raise CheckpointCorruptError("bad magic, not a checkpoint file")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointVersionError(f"format version {version}, expected {VERSION}")
    (config_len,) = struct.unpack("<I", take(4, "config length"))
    try:
        config_text = bytes(take(config_len, "config")).decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointCorruptError("config block is not valid utf-8") from None
    enc, dec, stream = _parse_config(config_text)

    (count,) = struct.unpack("<I", take(4, "tensor count"))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = bytes(take(name_len, "name")).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        if rank > 8:
            raise CheckpointCorruptError(f"implausible rank {rank} for {name}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_items = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = take(4 * n_items, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if pos != len(view):
        raise CheckpointCorruptError(f"{len(view) - pos} trailing bytes")
    return Checkpoint(encoder_cfg=enc, decoder_cfg=dec, stream=stream, tensors=tensors)


def _load_module(module, tensors, prefix):
    import torch

    state = module.state_dict()
    wanted = {k: v for k, v in tensors.items() if k.startswith(prefix)}
    for name, array in wanted.items():
        short = name[len(prefix):]
        if short not in state:
            raise CheckpointShapeError(f"unexpected tensor {name!r}")
        if tuple(state[short].shape) != array.shape:
            raise CheckpointShapeError(
                f"{name}: stored shape {array.shape}, model needs {tuple(state[short].shape)}"
            )
        state[short] = torch.from_numpy(array)
    missing = [k for k in state if prefix + k not in tensors and not k.endswith("grid")]
    if missing:
        raise CheckpointShapeError(f"checkpoint lacks tensors for {missing}")
    module.load_state_dict(state)
    return module


def restore_encoder(ckpt: Checkpoint, cfg: Optional[EncoderConfig] = None) -> CloudEncoder:
    """Build an encoder from the checkpoint and load its weights.

    An explicit ``cfg`` must be shape-compatible with the stored
    tensors; mismatches raise CheckpointShapeError.
    """
    encoder = CloudEncoder(cfg if cfg is not None else ckpt.encoder_cfg)
    return _load_module(encoder, ckpt.tensors, "encoder.")


def restore_decoder(ckpt: Checkpoint) -> FoldingDecoder:
    """Build the decoder when its tensors were saved (extras flag)."""
    if not any(k.startswith("decoder.") for k in ckpt.tensors):
        raise CheckpointShapeError("checkpoint holds no decoder tensors")
    decoder = FoldingDecoder(ckpt.decoder_cfg, ckpt.encoder_cfg.latent_dim)
    return _load_module(decoder, ckpt.tensors, "decoder.")


def tensors_from_module(module, prefix: str) -> Dict[str, np.ndarray]:
    """Named float32 copies of a module's parameters, ``prefix`` prepended."""
    return {
        prefix + name: p.detach().cpu().numpy().astype(np.float32, copy=True)
        for name, p in module.named_parameters()
    }
