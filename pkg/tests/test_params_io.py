"""TPNN container round trips and corruption handling."""

import numpy as np
import pytest

from medrt.errors import FormatError, ParseError, TruncationError
from medrt.nn import (QuantScheme, QuantizedParams, Tensor, build, load_params,
                      save_params)


def test_round_trip_is_bit_identical():
    p = build("tiny_class_net", seed=21)
    blob = save_params(p)
    p2 = load_params(blob)
    assert p2.model_id == p.model_id
    assert p2.version == p.version
    assert p2.seed == p.seed
    assert p2.equals(p)
    assert save_params(p2) == blob


def test_unet_round_trip():
    p = build("mini_unet", seed=22)
    p2 = load_params(save_params(p))
    assert p2.equals(p)
    assert p2.net == p.net


def test_corrupt_magic_raises_format_error():
    blob = bytearray(save_params(build("tiny_class_net", seed=23)))
    blob[1] ^= 0xFF
    with pytest.raises(FormatError):
        load_params(bytes(blob))


def test_truncation_raises():
    blob = save_params(build("tiny_class_net", seed=24))
    with pytest.raises(TruncationError):
        load_params(blob[:len(blob) // 2])


def test_version_skew_raises():
    blob = bytearray(save_params(build("tiny_class_net", seed=25)))
    blob[4] = 99
    with pytest.raises(ParseError):
        load_params(bytes(blob))


def test_corrupt_header_json_raises_without_partial_params():
    blob = bytearray(save_params(build("tiny_class_net", seed=26)))
    blob[12] = 0x00  # inside the JSON header
    with pytest.raises(ParseError):
        load_params(bytes(blob))


def test_trailing_garbage_raises():
    blob = save_params(build("tiny_class_net", seed=27))
    with pytest.raises(ParseError):
        load_params(blob + b"x")


def test_int8_params_round_trip_preserves_schemes():
    p = build("tiny_class_net", seed=28)
    w = p.tensors["L0.weight"]
    scheme = QuantScheme.per_channel([0.013, 0.25, 1.5, 0.75, 0.002, 0.11, 0.9, 3.25])
    qw = np.clip(np.rint(w.data / np.asarray(scheme.scale)[:, None, None, None]),
                 -127, 127).astype(np.int8)
    tensors = dict(p.tensors)
    tensors["L0.weight"] = Tensor.i8(qw, scheme)
    qp = QuantizedParams(
        net=p.net, tensors=tensors, model_id=p.model_id, version=2, seed=p.seed,
        input_scheme=QuantScheme.per_tensor(0.026, -3),
        act_schemes={0: QuantScheme.per_tensor(0.041, 7), 1: QuantScheme.per_tensor(0.041, 7)},
        fallback_layers=frozenset({8, 10}))
    blob = save_params(qp)
    q2 = load_params(blob)
    assert isinstance(q2, QuantizedParams)
    assert q2.tensors["L0.weight"].quant == scheme
    assert q2.input_scheme == qp.input_scheme
    assert q2.act_schemes == qp.act_schemes
    assert q2.fallback_layers == qp.fallback_layers
    assert q2.equals(qp)
    assert save_params(q2) == blob
