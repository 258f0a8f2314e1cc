"""Binary checkpoint format.

Layout: 4-byte magic "CFM1" | uint32 LE metadata byte count | metadata
JSON (UTF-8) | online params (float64 LE, flat) | EMA params (same).
The metadata's layout manifest fully determines the slicing: layer-major,
weights-then-bias per layer, row-major weights.  Round trips are
bit-exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .field import TimeEmbedding, VelocityField

MAGIC = b"CFM1"


@dataclass
class Checkpoint:
    meta: dict
    online: list[np.ndarray]
    ema: list[np.ndarray]


def _layout_manifest(field: VelocityField) -> list[dict]:
    manifest = []
    for i, shape in enumerate(field.layout()):
        layer, part = divmod(i, 2)
        name = f"{'w' if part == 0 else 'b'}{layer}"
        manifest.append({"name": name, "shape": list(shape)})
    return manifest


def checkpoint_from_field(field: VelocityField, step: int, config: dict | None,
                          seed: int | None = None) -> Checkpoint:
    meta = {
        "version": 1,
        "step": int(step),
        "config": config,
        "rng": {"seed": seed, "scheme": "philox(seed, stream_id)"},
        "arch": {
            "dim": field.dim,
            "hidden": list(field.hidden),
            "act": field.act,
            "time_freqs": field.embed.n_freqs,
            "time_base": field.embed.base,
        },
        "layout": _layout_manifest(field),
    }
    return Checkpoint(meta=meta, online=field.params, ema=field.ema)


def field_from_checkpoint(ckpt: Checkpoint) -> VelocityField:
    arch = ckpt.meta["arch"]
    embed = TimeEmbedding(n_freqs=arch["time_freqs"], base=arch["time_base"])
    return VelocityField.from_params(arch["dim"], tuple(arch["hidden"]),
                                     arch["act"], embed, ckpt.online, ckpt.ema)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    meta_bytes = json.dumps(ckpt.meta).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        for group in (ckpt.online, ckpt.ema):
            for arr in group:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad checkpoint magic {blob[:4]!r}")
    if len(blob) < 8:
        raise ValueError("truncated checkpoint: missing metadata length")
    (meta_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + meta_len:
        raise ValueError("truncated checkpoint: metadata cut short")
    meta = json.loads(blob[8:8 + meta_len].decode("utf-8"))
    shapes = [tuple(entry["shape"]) for entry in meta["layout"]]
    count = sum(int(np.prod(s)) for s in shapes)
    body = blob[8 + meta_len:]
    expect = 2 * count * 8
    if len(body) != expect:
        raise ValueError(
            f"checkpoint length mismatch: {len(body)} payload bytes, "
            f"expected {expect} for the declared layout"
        )
    flat = np.frombuffer(body, dtype="<f8")

    def split(vec: np.ndarray) -> list[np.ndarray]:
        out, at = [], 0
        for s in shapes:
            size = int(np.prod(s))
            out.append(vec[at:at + size].reshape(s).astype(np.float64))
            at += size
        return out

    return Checkpoint(meta=meta, online=split(flat[:count]), ema=split(flat[count:]))
