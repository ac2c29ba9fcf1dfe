"""Binary checkpoint container.

Layout: the magic ``RAREv1``, an 8-byte little-endian header length, a UTF-8
JSON header, then every tensor's raw little-endian bytes back to back in
header order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .exceptions import RareError
from .model import RareConfig, RareModel, init_model

MAGIC = b"RAREv1"
FORMAT_VERSION = 1
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class CheckpointError(RareError):
    pass


def save_checkpoint(model: RareModel, path, extra: dict | None = None) -> None:
    tag = model.config.precision
    tensors = model.named_tensors()
    header = {
        "format": "RAREv1",
        "version": FORMAT_VERSION,
        "in_dim": model.in_dim,
        "config": model.config.to_dict(),
        "tensors": [{"name": n, "shape": list(t.shape), "dtype": tag} for n, t in tensors],
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in tensors:
            fh.write(np.ascontiguousarray(t.data, dtype=_DTYPES[tag]).tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a RAREv1 checkpoint")
    (size,) = struct.unpack("<Q", fh.read(8))
    header = json.loads(fh.read(size).decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    return header


def load_checkpoint(path) -> RareModel:
    """Rebuild the architecture from the header's config echo and fill in the tensors."""
    with open(path, "rb") as fh:
        header = _read_header(fh)
        cfg = RareConfig.from_dict(header["config"])
        model = init_model(cfg, header["in_dim"], seed=0)
        slots = dict(model.named_tensors())
        if [e["name"] for e in header["tensors"]] != list(slots):
            raise CheckpointError("tensor list does not match the configured architecture")
        for entry in header["tensors"]:
            dt = _DTYPES[entry["dtype"]]
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            raw = fh.read(count * dt.itemsize)
            if len(raw) != count * dt.itemsize:
                raise CheckpointError(f"truncated data for {entry['name']}")
            target = slots[entry["name"]]
            if target.shape != shape:
                raise CheckpointError(f"{entry['name']}: shape {shape} != {target.shape}")
            target.data = np.frombuffer(raw, dtype=dt).reshape(shape).astype(cfg.dtype)
    return model
