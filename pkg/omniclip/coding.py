# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Binary container codec.

Layout (little endian)::

    magic     4 bytes  b"OMNI"
    version   u32
    hlen      u32      length of the header
    header    hlen bytes, UTF-8 JSON, sorted keys, compact separators
    payload   concatenated raw tensor bytes, directory order
    crc       u32      CRC32 of payload

The header carries a `tensors` directory: name, shape, dtype, offset and
nbytes of every blob in the payload.
"""

from __future__ import annotations

import json
import struct
import typing as ty
import zlib

import numpy as np

from . import consts

PREFIX: ty.Final = struct.Struct("<4sII")
FOOTER: ty.Final = struct.Struct("<I")


class CheckpointError(Exception):
    def __str__(self) -> str:
        return "Invalid checkpoint"


class InvalidFileError(CheckpointError):
    def __init__(self, reason: str = "") -> None:
        super().__init__(reason)
        self.reason = reason

    def __str__(self) -> str:
        return f"Invalid file: {self.reason}" if self.reason else "Invalid file"


class VersionMismatchError(CheckpointError):
    def __init__(self, found: int, expected: int) -> None:
        super().__init__(found, expected)
        self.found = found
        self.expected = expected

    def __str__(self) -> str:
        return (
            f"Checkpoint format version {self.found} is not supported "
            f"(this build reads version {self.expected})"
        )


class TruncatedFileError(CheckpointError):
    def __init__(self, needed: int, size: int) -> None:
        super().__init__(needed, size)
        self.needed = needed
        self.size = size

    def __str__(self) -> str:
        return f"Truncated file: need {self.needed} bytes, have {self.size}"


class ChecksumError(CheckpointError):
    def __init__(self, stored: int, computed: int) -> None:
        super().__init__(stored, computed)
        self.stored = stored
        self.computed = computed

    def __str__(self) -> str:
        return (
            f"Checksum error: stored {self.stored:08x}, "
            f"computed {self.computed:08x}"
        )


def dtype_tag(dtype: np.dtype[ty.Any]) -> str:
    """Little-endian dtype string, e.g. '<f8'."""
    return np.dtype(dtype).newbyteorder("<").str


def array_to_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype=dtype_tag(arr.dtype)).tobytes()


def array_from_bytes(
    buf: bytes | memoryview, tag: str, shape: ty.Sequence[int]
) -> np.ndarray:
    arr = np.frombuffer(buf, dtype=np.dtype(tag))
    return arr.astype(np.dtype(tag).newbyteorder("="), copy=True).reshape(
        tuple(shape)
    )


def encode_header(header: dict[str, ty.Any]) -> bytes:
    return json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def encode_container(
    header: dict[str, ty.Any],
    blobs: ty.Sequence[tuple[str, np.ndarray, dict[str, ty.Any]]],
    version: int = consts.CKPT_VERSION,
) -> bytes:
    """Pack `header` and named arrays; `blobs` entries are (name, array,
    extra directory fields)."""
    directory = []
    parts = []
    offset = 0
    for name, arr, extra in blobs:
        raw = array_to_bytes(arr)
        directory.append(
            {
                **extra,
                "name": name,
                "shape": list(arr.shape),
                "dtype": dtype_tag(arr.dtype),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        parts.append(raw)
        offset += len(raw)

    payload = b"".join(parts)
    head = encode_header({**header, "tensors": directory})
    return b"".join(
        (
            PREFIX.pack(consts.CKPT_MAGIC, version, len(head)),
            head,
            payload,
            FOOTER.pack(zlib.crc32(payload)),
        )
    )


def decode_container(
    data: bytes,
) -> tuple[dict[str, ty.Any], dict[str, tuple[np.ndarray, dict[str, ty.Any]]]]:
    """Unpack into (header, {name: (array, directory entry)})."""
    if len(data) < PREFIX.size:
        raise TruncatedFileError(PREFIX.size, len(data))

    magic, version, hlen = PREFIX.unpack_from(data)
    if magic != consts.CKPT_MAGIC:
        raise InvalidFileError(f"bad magic {magic!r}")

    if version != consts.CKPT_VERSION:
        raise VersionMismatchError(version, consts.CKPT_VERSION)

    start = PREFIX.size + hlen
    if len(data) < start:
        raise TruncatedFileError(start, len(data))

    try:
        header = json.loads(data[PREFIX.size : start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidFileError("unreadable header") from exc

    if not isinstance(header, dict) or not isinstance(
        header.get("tensors"), list
    ):
        raise InvalidFileError("header without tensor directory")

    directory: list[dict[str, ty.Any]] = header.pop("tensors")
    plen = sum(int(entry["nbytes"]) for entry in directory)
    end = start + plen + FOOTER.size
    if len(data) < end:
        raise TruncatedFileError(end, len(data))

    if len(data) > end:
        raise InvalidFileError(f"{len(data) - end} trailing bytes")

    payload = memoryview(data)[start : start + plen]
    (stored,) = FOOTER.unpack_from(data, start + plen)
    if (computed := zlib.crc32(payload)) != stored:
        raise ChecksumError(stored, computed)

    tensors = {}
    for entry in directory:
        off, size = int(entry["offset"]), int(entry["nbytes"])
        if off + size > plen:
            raise InvalidFileError(f"tensor {entry['name']} outside payload")

        arr = array_from_bytes(
            payload[off : off + size], entry["dtype"], entry["shape"]
        )
        tensors[entry["name"]] = (arr, entry)

    return header, tensors
