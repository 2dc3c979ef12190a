"""Perception dataset files.

Layout::

    b"LSRLDS1"          magic
    u32 + JSON          header: size S, frame count, class catalog, weather
                        catalog, per-frame weather ids, class counts/weights,
                        track, seed
    per frame           S*S*3 RGB bytes, then S*S class-id bytes
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from lsrl import semantics as sem
from lsrl.perception import PerceptionDataset

MAGIC = b"LSRLDS1"


def write_dataset(path: str | Path, ds: PerceptionDataset) -> None:
    counts = sem.class_frequencies(ds.semantic)
    weights = sem.compute_class_weights(counts)
    catalog = sorted(set(ds.weather_ids))
    header = {
        "size": ds.size,
        "frames": len(ds),
        "classes": list(sem.CLASS_NAMES),
        "weathers": catalog,
        "frame_weather": [catalog.index(w) for w in ds.weather_ids],
        "class_counts": [int(c) for c in counts],
        "class_weights": [float(w) for w in weights],
        "track": ds.track,
        "seed": ds.seed,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for rgb, grid in zip(ds.rgb, ds.semantic):
            fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())
            fh.write(np.ascontiguousarray(grid, dtype=np.uint8).tobytes())


def read_dataset(path: str | Path) -> PerceptionDataset:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a dataset file (bad magic)")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off : off + n])
    off += n
    if tuple(header["classes"]) != sem.CLASS_NAMES:
        raise ValueError(f"{path}: class catalog differs from this build")
    s, count = header["size"], header["frames"]
    frame = s * s * 3 + s * s
    body = np.frombuffer(raw, dtype=np.uint8, offset=off)
    if body.size != frame * count:
        raise ValueError(f"{path}: expected {count} frames of {s}x{s}, payload has {body.size} bytes")
    body = body.reshape(count, frame)
    rgb = body[:, : s * s * 3].reshape(count, s, s, 3).copy()
    grid = body[:, s * s * 3 :].reshape(count, s, s).copy()
    weathers = [header["weathers"][i] for i in header["frame_weather"]]
    return PerceptionDataset(
        rgb, grid, weathers, header["track"], header["seed"],
        np.array(header["class_weights"]), {"class_counts": header["class_counts"]},
    )
