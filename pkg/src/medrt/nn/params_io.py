"""Versioned binary container for Params.

Layout: magic "TPNN", u16 format version, u32 header length, JSON header
(network spec + ordered tensor directory), then raw little-endian tensor
payloads in directory order. Quantized models append a "TPQ8" section:
magic, u32 length, JSON with the input/activation schemes and fallback set.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from medrt.errors import FormatError, IntegrityError, ParseError, TruncationError
from medrt.nn.network import NetworkSpec
from medrt.nn.params import Params, QuantizedParams
from medrt.nn.tensor import QuantScheme, Tensor

MAGIC = b"TPNN"
QMAGIC = b"TPQ8"
FORMAT_VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8"), "i8": np.dtype("i1")}


def save_params(params: Params) -> bytes:
    entries = []
    payloads = []
    for key, t in params.tensors.items():
        entry = {"key": key, "dtype": t.dtype, "shape": list(t.shape)}
        if t.quant is not None:
            entry["quant"] = t.quant.to_json()
        entries.append(entry)
        payloads.append(np.ascontiguousarray(t.data.astype(_DTYPES[t.dtype], copy=False)).tobytes())
    header = {
        "model_id": params.model_id,
        "version": params.version,
        "seed": params.seed,
        "precision": params.precision,
        "net": params.net.to_json(),
        "entries": entries,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<I", len(hbytes))
    out += hbytes
    for p in payloads:
        out += p
    if isinstance(params, QuantizedParams):
        qjson = json.dumps({
            "input_scheme": params.input_scheme.to_json(),
            "act_schemes": {str(k): v.to_json() for k, v in params.act_schemes.items()},
            "fallback_layers": sorted(params.fallback_layers),
        }, sort_keys=True, separators=(",", ":")).encode()
        out += QMAGIC
        out += struct.pack("<I", len(qjson))
        out += qjson
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise TruncationError(f"truncated while reading {what}", offset=self.pos)
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b


def load_params(data: bytes) -> Params:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic: not a TPNN container", offset=0)
    (version,) = struct.unpack("<H", r.take(2, "format version"))
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", offset=4)
    (hlen,) = struct.unpack("<I", r.take(4, "header length"))
    hbytes = r.take(hlen, "header")
    try:
        header = json.loads(hbytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"header is not valid JSON: {e}", offset=10) from None
    try:
        net = NetworkSpec.from_json(header["net"])
        entries = header["entries"]
        model_id = header["model_id"]
        p_version = header["version"]
        seed = header.get("seed", 0)
        precision = header.get("precision", "f32")
    except (KeyError, TypeError) as e:
        raise ParseError(f"header missing field: {e}") from None

    tensors: dict[str, Tensor] = {}
    for entry in entries:
        try:
            key, dt, shape = entry["key"], entry["dtype"], tuple(entry["shape"])
        except (KeyError, TypeError) as e:
            raise ParseError(f"malformed tensor entry: {e}") from None
        if dt not in _DTYPES:
            raise ParseError(f"unknown dtype {dt!r} for tensor {key!r}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * _DTYPES[dt].itemsize
        raw = r.take(nbytes, f"tensor {key!r}")
        arr = np.frombuffer(raw, dtype=_DTYPES[dt]).reshape(shape).copy()
        scheme = QuantScheme.from_json(entry["quant"]) if entry.get("quant") else None
        try:
            tensors[key] = Tensor(arr, scheme)
        except ValueError as e:
            raise ParseError(f"tensor {key!r} invalid: {e}") from None

    if precision == "int8":
        if r.take(4, "quant section magic") != QMAGIC:
            raise FormatError("missing TPQ8 section for int8 params", offset=r.pos - 4)
        (qlen,) = struct.unpack("<I", r.take(4, "quant section length"))
        try:
            q = json.loads(r.take(qlen, "quant section").decode("utf-8"))
            input_scheme = QuantScheme.from_json(q["input_scheme"])
            act_schemes = {int(k): QuantScheme.from_json(v)
                           for k, v in q["act_schemes"].items()}
            fallback = frozenset(q["fallback_layers"])
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"quant section malformed: {e}") from None
        params: Params = QuantizedParams(
            net=net, tensors=tensors, model_id=model_id, version=p_version, seed=seed,
            input_scheme=input_scheme, act_schemes=act_schemes, fallback_layers=fallback)
    else:
        params = Params(net=net, tensors=tensors, model_id=model_id,
                        version=p_version, seed=seed, precision=precision)
    if r.pos != len(data):
        raise IntegrityError(f"{len(data) - r.pos} trailing bytes after payload",
                             offset=r.pos)
    return params
