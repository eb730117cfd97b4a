"""Fixed 64-byte headers for the weight cache ("FPLW") and snapshots ("FPLS").

Both formats share the layout

    magic(4s) | version(u32) | N(u32) | aux(u32) | f64 | f64 | f64 |
    payload_nbytes(u64) | sha256-prefix(16s)

little-endian throughout, followed by a little-endian float64 payload.
The digest covers the raw payload bytes; loaders reject mismatches instead
of silently recomputing.
"""

import hashlib
import struct

from .errors import UsageError

HEADER = struct.Struct("<4sIII ddd Q 16s")
assert HEADER.size == 64

FORMAT_VERSION = 1


def digest(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()[:16]


def pack_header(magic: bytes, n: int, aux: int, f0: float, f1: float, f2: float,
                payload: bytes) -> bytes:
    return HEADER.pack(magic, FORMAT_VERSION, n, aux, f0, f1, f2,
                       len(payload), digest(payload))


def read_block(path, magic: bytes):
    """Read and validate a header+payload file; returns (fields, payload)."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            raise UsageError(
                f"{path}: truncated header, expected {HEADER.size} bytes, got {len(head)}"
            )
        m, version, n, aux, f0, f1, f2, nbytes, dig = HEADER.unpack(head)
        if m != magic:
            raise UsageError(f"{path}: bad magic {m!r}, expected {magic!r}")
        if version != FORMAT_VERSION:
            raise UsageError(f"{path}: unsupported format version {version}")
        payload = fh.read()
    if len(payload) != nbytes:
        raise UsageError(
            f"{path}: truncated payload, expected {nbytes} bytes, got {len(payload)}"
        )
    if digest(payload) != dig:
        raise UsageError(f"{path}: payload checksum mismatch")
    return (n, aux, f0, f1, f2), payload
