"""Binary checkpoints for perception and control networks.

Layout::

    b"LSRL1"            magic
    u16                 format version
    u32 + JSON          header: kind, spec echo, training step, seed
    parameter block     see lsrl.nn.serialize
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lsrl.nn import read_arrays, write_arrays

MAGIC = b"LSRL1"
VERSION = 1
KINDS = ("perception", "control")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str
    spec: dict
    params: dict[str, np.ndarray]
    step: int = 0
    seed: int = 0
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    if ckpt.kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {ckpt.kind!r}")
    header = json.dumps(
        {"kind": ckpt.kind, "spec": ckpt.spec, "step": ckpt.step, "seed": ckpt.seed, "extra": ckpt.extra},
        sort_keys=True,
    ).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", VERSION, len(header)))
    buf.write(header)
    write_arrays(buf, ckpt.params)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path, expected_kind: str | None = None) -> Checkpoint:
    raw = Path(path).read_bytes()
    fh = io.BytesIO(raw)
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    head = fh.read(6)
    if len(head) != 6:
        raise CheckpointError(f"{path}: truncated header")
    version, n = struct.unpack("<HI", head)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    blob = fh.read(n)
    if len(blob) != n:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    if expected_kind is not None and header["kind"] != expected_kind:
        raise CheckpointError(f"{path}: expected a {expected_kind} checkpoint, found {header['kind']}")
    try:
        params = read_arrays(fh)
    except (ValueError, struct.error, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: bad parameter block ({exc})") from exc
    if fh.read(1):
        raise CheckpointError(f"{path}: trailing bytes after parameter block")
    return Checkpoint(header["kind"], header["spec"], params, header["step"], header["seed"], header.get("extra", {}))
