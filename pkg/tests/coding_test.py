# Copyright © 2024 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import json
import struct
import zlib

import numpy as np
import pytest

from omniclip import coding, consts


def _container(**header):
    blobs = [
        ("a", np.arange(6, dtype=np.float64).reshape(2, 3), {"kind": "param"}),
        ("b", np.array(1.5, dtype=np.float32), {"kind": "param"}),
    ]
    return coding.encode_container(header or {"step": 3}, blobs)


def test_roundtrip():
    header, tensors = coding.decode_container(_container())
    assert header == {"step": 3}
    arr, entry = tensors["a"]
    assert np.array_equal(arr, np.arange(6).reshape(2, 3))
    assert arr.dtype == np.float64
    assert entry["shape"] == [2, 3]
    assert entry["dtype"] == "<f8"
    assert entry["offset"] == 0
    assert entry["kind"] == "param"

    scalar, entry = tensors["b"]
    assert scalar.shape == ()
    assert scalar.dtype == np.float32
    assert entry["offset"] == 48


def test_layout():
    data = _container()
    magic, version, hlen = coding.PREFIX.unpack_from(data)
    assert magic == b"OMNI"
    assert version == consts.CKPT_VERSION
    header = json.loads(data[12 : 12 + hlen])
    assert [e["name"] for e in header["tensors"]] == ["a", "b"]
    payload = data[12 + hlen : -4]
    assert len(payload) == 52
    assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(payload)


def test_encoding_is_deterministic():
    assert _container(step=1, z=2) == _container(z=2, step=1)


def test_decoded_arrays_are_writable():
    _, tensors = coding.decode_container(_container())
    arr, _ = tensors["a"]
    arr[0, 0] = 9.0
    assert arr[0, 0] == 9.0


def test_big_endian_input_stored_little_endian():
    arr = np.array([1.0, 2.0], dtype=">f8")
    data = coding.encode_container({}, [("x", arr, {})])
    _, tensors = coding.decode_container(data)
    out, entry = tensors["x"]
    assert entry["dtype"] == "<f8"
    assert np.array_equal(out, [1.0, 2.0])


@pytest.mark.parametrize("size", [0, 5, 11, 20])
def test_truncated(size):
    with pytest.raises(coding.TruncatedFileError):
        coding.decode_container(_container()[:size])


def test_truncated_payload():
    data = _container()
    with pytest.raises(coding.TruncatedFileError) as err:
        coding.decode_container(data[:-1])

    assert err.value.needed == len(data)


def test_bad_magic():
    data = b"XXXX" + _container()[4:]
    with pytest.raises(coding.InvalidFileError):
        coding.decode_container(data)


def test_version_mismatch():
    data = bytearray(_container())
    data[4:8] = struct.pack("<I", consts.CKPT_VERSION + 1)
    with pytest.raises(coding.VersionMismatchError) as err:
        coding.decode_container(bytes(data))

    assert err.value.found == consts.CKPT_VERSION + 1
    assert "not supported" in str(err.value)


def test_checksum():
    data = bytearray(_container())
    data[-5] ^= 0xFF
    with pytest.raises(coding.ChecksumError):
        coding.decode_container(bytes(data))


def test_trailing_bytes():
    with pytest.raises(coding.InvalidFileError) as err:
        coding.decode_container(_container() + b"\0")

    assert "trailing" in str(err.value)


def test_header_not_json():
    head = b"{nope"
    data = coding.PREFIX.pack(consts.CKPT_MAGIC, consts.CKPT_VERSION, len(head))
    data += head + struct.pack("<I", zlib.crc32(b""))
    with pytest.raises(coding.InvalidFileError):
        coding.decode_container(data)


def test_header_without_directory():
    head = coding.encode_header({"step": 1})
    data = coding.PREFIX.pack(consts.CKPT_MAGIC, consts.CKPT_VERSION, len(head))
    data += head + struct.pack("<I", zlib.crc32(b""))
    with pytest.raises(coding.InvalidFileError):
        coding.decode_container(data)


def test_errors_are_checkpoint_errors():
    for exc in (
        coding.InvalidFileError("x"),
        coding.VersionMismatchError(2, 1),
        coding.TruncatedFileError(10, 2),
        coding.ChecksumError(1, 2),
    ):
        assert isinstance(exc, coding.CheckpointError)
        assert str(exc)
