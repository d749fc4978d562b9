"""Binary encoding primitives shared by every protocol message.

Points are a flag byte followed by big-endian coordinates padded to the
field width: ``0x00`` alone for the point at infinity, ``0x04 || x || y``
otherwise.  Strings carry a one-byte length prefix, integers are fixed-width
big-endian, and a complete message is framed by a four-byte length.
"""

from __future__ import annotations

import struct

from .ec import INFINITY, CurveParams, Point, get_curve
from .errors import MalformedPointError

_INF_FLAG = 0x00
_AFFINE_FLAG = 0x04


class WireError(ValueError):
    pass


def encode_point(P: Point, curve: CurveParams) -> bytes:
    if P.is_infinity:
        return bytes([_INF_FLAG])
    w = curve.field_bytes
    return bytes([_AFFINE_FLAG]) + P.x.to_bytes(w, "big") + P.y.to_bytes(w, "big")


def point_size(P: Point, curve: CurveParams) -> int:
    return 1 if P.is_infinity else 1 + 2 * curve.field_bytes


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">B", v))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">H", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">I", v))
        return self

    def varint(self, v: int) -> "Writer":
        # length-prefixed big-endian unsigned integer
        raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")
        return self.u8(len(raw)).raw(raw)

    def str(self, s: str) -> "Writer":
        raw = s.encode()
        if len(raw) > 255:
            raise WireError(f"string too long for wire: {s[:20]!r}...")
        return self.u8(len(raw)).raw(raw)

    def point(self, P: Point, curve: CurveParams) -> "Writer":
        return self.raw(encode_point(P, curve))

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(b)
        return self

    def body(self) -> bytes:
        return b"".join(self._parts)

    def frame(self) -> bytes:
        body = self.body()
        return struct.pack(">I", len(body)) + body


class Reader:
    def __init__(self, data: bytes, framed: bool = False) -> None:
        if framed:
            if len(data) < 4:
                raise WireError("truncated frame header")
            (n,) = struct.unpack_from(">I", data, 0)
            if len(data) != 4 + n:
                raise WireError(f"frame length {n} does not match payload of {len(data) - 4}")
            data = data[4:]
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WireError("truncated message")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def varint(self) -> int:
        return int.from_bytes(self._take(self.u8()), "big")

    def str(self) -> str:
        return self._take(self.u8()).decode()

    def curve(self) -> CurveParams:
        return get_curve(self.str())

    def point(self, curve: CurveParams) -> Point:
        flag = self.u8()
        if flag == _INF_FLAG:
            return INFINITY
        if flag != _AFFINE_FLAG:
            raise WireError(f"unknown point flag 0x{flag:02x}")
        w = curve.field_bytes
        P = Point(int.from_bytes(self._take(w), "big"), int.from_bytes(self._take(w), "big"))
        if not curve.contains(P):
            raise MalformedPointError(f"decoded {P} is not on {curve.name}")
        return P

    def done(self) -> None:
        if self.pos != len(self.data):
            raise WireError(f"{len(self.data) - self.pos} trailing bytes")
