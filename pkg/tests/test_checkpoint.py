import struct

import numpy as np
import pytest

from stylecast.checkpoint import (MAGIC, CheckpointError, decode_checkpoint, encode_checkpoint, load_checkpoint,
                                  save_checkpoint)
from stylecast.model import Seq2Seq
from stylecast.schemes import ControlScheme

from conftest import toy_model


def test_header_layout():
    data = encode_checkpoint({"a": 1}, {"w": np.zeros((2, 3))})
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8])[0] == 1


def test_records_sorted_and_float32():
    params = {"zeta": np.arange(3.0), "alpha": np.ones((2, 2))}
    config, back = decode_checkpoint(encode_checkpoint({}, params))
    assert list(back) == ["alpha", "zeta"]
    np.testing.assert_array_equal(back["zeta"], [0.0, 1.0, 2.0])


def test_load_save_is_byte_identical(tmp_path):
    model = toy_model(ControlScheme.BIAS)
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    model.save(str(first))
    Seq2Seq.load(str(first)).save(str(second))
    assert first.read_bytes() == second.read_bytes()


def test_every_scheme_round_trips(tmp_path):
    for scheme in ControlScheme:
        path = tmp_path / f"{scheme.value}.ckpt"
        model = toy_model(scheme)
        model.save(str(path))
        loaded = Seq2Seq.load(str(path))
        assert loaded.scheme is scheme
        assert loaded.vocab.itos == model.vocab.itos


def test_bad_magic(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(str(path))


def test_truncated_file():
    data = encode_checkpoint({}, {"w": np.ones(4)})
    with pytest.raises(CheckpointError):
        decode_checkpoint(data[:-3])


def test_save_is_atomic_on_failure(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(str(path), {}, {"w": np.ones(2)})
    before = path.read_bytes()
    with pytest.raises(TypeError):
        save_checkpoint(str(path), {"bad": object()}, {"w": np.ones(2)})
    assert path.read_bytes() == before
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]
