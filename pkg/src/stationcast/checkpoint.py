"""Parameter checkpoint container.

Layout of a ``.ckpt`` file::

    b"STCKPT01"                 8-byte magic
    uint64 little-endian        length of the JSON header in bytes
    JSON header (UTF-8)         {"manifest": {...}, "params": [{"name", "shape", "offset"}, ...]}
    payload                     little-endian float64 values, row-major, in header order

Parameters are written in sorted name order and the header is serialised
with sorted keys, so identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"STCKPT01"


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical_json(config)).hexdigest()[:16]


def encode(params: dict[str, np.ndarray], manifest: dict) -> bytes:
    index, chunks, offset = [], [], 0
    for name in sorted(params):
        a = np.ascontiguousarray(params[name], dtype="<f8")
        if not np.all(np.isfinite(a)):
            raise DataError(f"parameter {name!r} is not finite")
        index.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes(order="C"))
        offset += a.size
    header = _canonical_json({"manifest": manifest, "params": index})
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def decode(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:8] != MAGIC:
        raise DataError("not a stationcast checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    payload = np.frombuffer(blob, dtype="<f8", offset=16 + hlen)
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        if start + n > payload.size:
            raise DataError(f"checkpoint payload truncated at {entry['name']!r}")
        params[entry["name"]] = payload[start : start + n].reshape(shape).astype(np.float64)
    return params, header["manifest"]


def save(path, params: dict[str, np.ndarray], manifest: dict) -> None:
    Path(path).write_bytes(encode(params, manifest))


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    return decode(Path(path).read_bytes())
