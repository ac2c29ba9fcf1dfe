import json
import struct

import numpy as np
import pytest

from rare.checkpoint import CheckpointError, load_checkpoint, read_header, save_checkpoint
from rare.graph import generate_sbm
from rare.model import RareConfig, embed, pretrain


@pytest.mark.parametrize("overrides", [{}, {"precision": "f32"}, {"backbone": "gin"},
                                       {"no_predictor": True, "zero_tokens": True}])
def test_round_trip_zero_ulp(tmp_path, overrides):
    g = generate_sbm([6, 6], 0.4, 0.1, 5, 1.0, seed=0)
    cfg = RareConfig(hidden=8, heads=2, latent_dim=4, epochs=3, **overrides)
    model, _ = pretrain(g, cfg, seed=0)
    path = tmp_path / "m.rare"
    save_checkpoint(model, path, extra={"note": "x"})
    back = load_checkpoint(path)
    assert back.config == cfg
    a, b = embed(model, g), embed(back, g)
    assert a.dtype == b.dtype == cfg.dtype
    assert a.tobytes() == b.tobytes()
    for (na, ta), (nb, tb) in zip(model.named_tensors(), back.named_tensors()):
        assert na == nb and ta.data.tobytes() == tb.data.tobytes()


def test_layout(tmp_path):
    g = generate_sbm([3, 3], 0.4, 0.1, 2, 1.0, seed=0)
    model, _ = pretrain(g, RareConfig(hidden=4, heads=2, latent_dim=2, epochs=1), seed=0)
    path = tmp_path / "m.rare"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    assert raw[:6] == b"RAREv1"
    (size,) = struct.unpack("<Q", raw[6:14])
    header = json.loads(raw[14:14 + size])
    assert header == read_header(path)
    assert header["format"] == "RAREv1" and header["version"] == 1
    total = sum(int(np.prod(t["shape"])) * 8 for t in header["tensors"])
    assert len(raw) == 14 + size + total
    first = header["tensors"][0]
    data = np.frombuffer(raw[14 + size:14 + size + 8 * int(np.prod(first["shape"]))], "<f8")
    assert np.array_equal(data, dict(model.named_tensors())[first["name"]].data.ravel())


def test_rejects_garbage(tmp_path):
    path = tmp_path / "bad.rare"
    path.write_bytes(b"nope")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_truncated(tmp_path):
    g = generate_sbm([3, 3], 0.4, 0.1, 2, 1.0, seed=0)
    model, _ = pretrain(g, RareConfig(hidden=4, heads=2, latent_dim=2, epochs=1), seed=0)
    path = tmp_path / "m.rare"
    save_checkpoint(model, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
