"""Length-prefixed byte-string framing (big-endian 32-bit lengths)."""

from __future__ import annotations

import struct

from ..bits import BitString


class DecodeError(ValueError):
    pass


def pack_fields(*fields: bytes) -> bytes:
    out = bytearray()
    for f in fields:
        out += struct.pack(">I", len(f))
        out += f
    return bytes(out)


def unpack_fields(data: bytes, count: int | None = None) -> list[bytes]:
    fields = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError("truncated length prefix")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + n > len(data):
            raise DecodeError("truncated field")
        fields.append(data[pos:pos + n])
        pos += n
    if count is not None and len(fields) != count:
        raise DecodeError(f"expected {count} fields, got {len(fields)}")
    return fields


def pack_u32(value: int) -> bytes:
    return struct.pack(">I", value)


def unpack_u32(data: bytes) -> int:
    if len(data) != 4:
        raise DecodeError("u32 field must be 4 bytes")
    return struct.unpack(">I", data)[0]


def pack_bits(bs: BitString) -> bytes:
    """Bit length followed by the packed bits."""
    return pack_fields(pack_u32(len(bs)), bs.to_bytes())


def unpack_bits(data: bytes) -> BitString:
    n_raw, payload = unpack_fields(data, 2)
    n = unpack_u32(n_raw)
    if len(payload) != (n + 7) // 8:
        raise DecodeError("bit payload size does not match declared length")
    bs = BitString.from_bytes(payload, n)
    if n % 8 and BitString.from_bytes(payload)[n:].count():
        raise DecodeError("nonzero padding bits")
    return bs
