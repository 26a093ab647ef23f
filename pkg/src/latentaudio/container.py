"""Shared on-disk tensor container.

Layout, all little-endian:

    magic     7 bytes, last byte is the format version
    u32       header byte length
    header    UTF-8 "key=value" lines
    tensor*   u32 rank, u32 dims[rank], float32 payload (row-major)
    u32       CRC32 of every preceding byte

Tensors are parsed until exactly four bytes (the checksum) remain, so the
tensor count is implicit. Readers check, in order: magic prefix, version
byte, checksum. Payloads are always float32 regardless of in-memory dtype.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .exceptions import CorruptFileError, FormatVersionMismatchError

MAGIC_LEN = 7


def write_container(path, magic: bytes, header: dict, tensors) -> None:
    """Serialize header fields and float32 tensors under the given magic."""
    if len(magic) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes, got {len(magic)}")
    header_text = "".join(f"{k}={v}\n" for k, v in header.items())
    header_bytes = header_text.encode("utf-8")
    parts = [magic, struct.pack("<I", len(header_bytes)), header_bytes]
    for tensor in tensors:
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def read_container(path, magic: bytes) -> tuple[dict, list]:
    """Read back (header dict, tensor list); tensors come out float32.

    Raises:
        CorruptFileError: wrong magic prefix, bad checksum, or truncation.
        FormatVersionMismatchError: right family, unknown version byte.
    """
    raw = Path(path).read_bytes()
    if len(raw) < MAGIC_LEN or raw[: MAGIC_LEN - 1] != magic[: MAGIC_LEN - 1]:
        raise CorruptFileError(f"{path}: magic bytes do not match")
    if raw[MAGIC_LEN - 1] != magic[MAGIC_LEN - 1]:
        raise FormatVersionMismatchError(
            f"{path}: format version {raw[MAGIC_LEN - 1]}, "
            f"expected {magic[MAGIC_LEN - 1]}"
        )
    if len(raw) < MAGIC_LEN + 8:
        raise CorruptFileError(f"{path}: file truncated")
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CorruptFileError(f"{path}: checksum mismatch")

    pos = MAGIC_LEN
    (header_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    end = len(raw) - 4
    if pos + header_len > end:
        raise CorruptFileError(f"{path}: header overruns file")
    header = {}
    for line in raw[pos : pos + header_len].decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            header[key] = value
    pos += header_len

    tensors = []
    while pos < end:
        if pos + 4 > end:
            raise CorruptFileError(f"{path}: dangling bytes after last tensor")
        (rank,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if pos + 4 * rank > end:
            raise CorruptFileError(f"{path}: tensor shape overruns file")
        shape = struct.unpack_from(f"<{rank}I", raw, pos)
        pos += 4 * rank
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        nbytes = 4 * count
        if pos + nbytes > end:
            raise CorruptFileError(f"{path}: tensor payload overruns file")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=pos)
        tensors.append(arr.reshape(shape).copy())
        pos += nbytes
    return header, tensors
