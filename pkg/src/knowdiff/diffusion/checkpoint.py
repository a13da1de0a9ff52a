"""Denoiser checkpoint serialization: arch + schedule header, named float64
parameter arrays, enveloped with magic/version/checksum."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..exceptions import FileFormatError
from ..formats import MAGIC_CHECKPOINT, read_envelope, write_envelope
from .network import Architecture, DenoiserModel
from .schedule import NoiseSchedule

_U32 = struct.Struct("<I")
_PARAM_HEADER = struct.Struct("<HB")


def save_checkpoint(path, model: DenoiserModel, sched: NoiseSchedule) -> None:
    header = {
        "arch": json.loads(model.arch.to_json()),
        "schedule": {"beta_min": sched.beta_min, "beta_max": sched.beta_max,
                     "eps_t": sched.eps_t},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [_U32.pack(len(header_bytes)), header_bytes,
              _U32.pack(len(model.params))]
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name], dtype=np.float64)
        name_bytes = name.encode("utf-8")
        chunks.append(_PARAM_HEADER.pack(len(name_bytes), arr.ndim))
        chunks.append(name_bytes)
        for dim in arr.shape:
            chunks.append(_U32.pack(dim))
        chunks.append(arr.tobytes())
    write_envelope(path, MAGIC_CHECKPOINT, b"".join(chunks))


def load_checkpoint(path) -> tuple[DenoiserModel, NoiseSchedule]:
    payload = read_envelope(path, MAGIC_CHECKPOINT)
    offset = 0
    (header_len,) = _U32.unpack_from(payload, offset)
    offset += _U32.size
    header = json.loads(payload[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    arch = Architecture(**header["arch"])
    sched = NoiseSchedule(**header["schedule"])
    (n_params,) = _U32.unpack_from(payload, offset)
    offset += _U32.size
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        name_len, ndim = _PARAM_HEADER.unpack_from(payload, offset)
        offset += _PARAM_HEADER.size
        name = payload[offset:offset + name_len].decode("utf-8")
        offset += name_len
        shape = []
        for _ in range(ndim):
            (dim,) = _U32.unpack_from(payload, offset)
            offset += _U32.size
            shape.append(dim)
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype=np.float64, count=count, offset=offset)
        offset += count * 8
        params[name] = arr.reshape(shape).copy()
    model = DenoiserModel(arch, params)
    expected = {f"w{i}" for i in range(arch.hidden_layers)} \
        | {f"b{i}" for i in range(arch.hidden_layers)} | {"w_out", "b_out"}
    if set(params) != expected:
        raise FileFormatError(
            f"checkpoint parameter names {sorted(params)} do not match "
            f"architecture (expected {sorted(expected)})")
    return model, sched
