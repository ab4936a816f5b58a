"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"LPGC" | u8 version | u32 meta_len | meta (UTF-8 "key=value" lines)
    u32 n_arrays | n_arrays * (u16 name_len | name | u8 rank | rank * u32 dim | float32 data)
    u32 crc32 of every preceding byte

Arrays are stored as float32, so a float32 parameter set round-trips bit for
bit.  A file that is truncated or altered fails the CRC and is rejected
before any array is returned.
"""

from __future__ import annotations

import os
import struct
import zlib
from collections import OrderedDict
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

MAGIC = b"LPGC"
VERSION = 1


class CheckpointError(Exception):
    pass


class LayoutMismatchError(CheckpointError):
    pass


def dumps(arrays: Mapping[str, np.ndarray], metadata: Mapping[str, object]) -> bytes:
    meta_lines = []
    for key, value in metadata.items():
        key, text = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in text:
            raise CheckpointError(f"metadata entry {key!r} cannot be encoded")
        meta_lines.append(f"{key}={text}")
    meta = "\n".join(meta_lines).encode("utf-8")
    parts = [MAGIC, struct.pack("<BI", VERSION, len(meta)), meta, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(blob: bytes) -> Tuple["OrderedDict[str, np.ndarray]", Dict[str, str]]:
    if len(blob) < 13 or blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if blob[4] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob[4]}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint is truncated or corrupt (checksum mismatch)")
    try:
        (meta_len,) = struct.unpack_from("<I", body, 5)
        pos = 9
        meta_text = body[pos:pos + meta_len].decode("utf-8")
        pos += meta_len
        metadata = dict(line.split("=", 1) for line in meta_text.split("\n") if line)
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos:pos + name_len].decode("utf-8")
            pos += name_len
            rank = body[pos]
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            n = int(np.prod(dims, dtype=np.int64))
            if pos + 4 * n > len(body):
                raise CheckpointError("array data runs past end of file")
            arrays[name] = np.frombuffer(body, dtype="<f4", count=n, offset=pos).reshape(dims).astype(np.float32)
            pos += 4 * n
        if pos != len(body):
            raise CheckpointError("trailing bytes after the last array")
    except (struct.error, IndexError, UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from None
    return arrays, metadata


def save(path: str, params: Mapping[str, np.ndarray], metadata: Mapping[str, object],
         optimizer_state: Optional[Mapping[str, np.ndarray]] = None) -> None:
    """Atomic write: a temporary sibling file is renamed over ``path``."""
    arrays = OrderedDict(params)
    for k, v in (optimizer_state or {}).items():
        arrays[f"opt/{k}"] = v
    blob = dumps(arrays, metadata)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load(path: str, expected_layout_hash: Optional[str] = None):
    """Returns ``(params, metadata, optimizer_state)``."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    arrays, metadata = loads(blob)
    if expected_layout_hash is not None and metadata.get("layout_hash") != expected_layout_hash:
        raise LayoutMismatchError(
            f"checkpoint layout {metadata.get('layout_hash')} does not match game layout {expected_layout_hash}")
    params = OrderedDict((k, v) for k, v in arrays.items() if not k.startswith("opt/"))
    opt = {k[4:]: v for k, v in arrays.items() if k.startswith("opt/")}
    return params, metadata, opt
