"""EC-ElGamal style message encryption under a shared group key point.

Every byte ``m`` becomes the point ``m*G``.  With group key point ``S`` and a
per-message scalar ``k``, the ciphertext is the header ``k*G`` plus one body
point ``m_i*G + k*S`` per byte.  A holder of the group key removes the mask
``s*(k*G)`` (where ``S = s*G``) and looks the remaining point up in a small
decode table.

A ``packed`` mode folds the whole message into base-B digits (B up to 2^16)
so long payloads cost fewer points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from . import metrics
from .ec import INFINITY, CurveParams, Point, _add, dlog, point_neg, scalar_mult
from .errors import (
    DecryptionError,
    NotInSubgroupError,
    TableTooLargeError,
    UnencodableByteError,
)
from .wire import Reader, Writer

#: largest digit base used by packed mode
PACKED_BASE_LIMIT = 1 << 16
_PACK_SENTINEL = 0x01


@dataclass(frozen=True)
class Ciphertext:
    header: Point
    body: tuple[Point, ...]
    curve: CurveParams
    packed: bool = False

    def __str__(self) -> str:
        return ":".join(repr(P) for P in (self.header,) + self.body)

    def to_bytes(self) -> bytes:
        w = Writer().str(self.curve.name).u8(int(self.packed)).point(self.header, self.curve)
        w.u32(len(self.body))
        for P in self.body:
            w.point(P, self.curve)
        return w.frame()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        r = Reader(data, framed=True)
        curve = r.curve()
        packed = bool(r.u8())
        header = r.point(curve)
        body = tuple(r.point(curve) for _ in range(r.u32()))
        r.done()
        return cls(header, body, curve, packed)


@lru_cache(maxsize=16)
def _decode_table(curve: CurveParams, size: int) -> dict[Point, int]:
    table = {INFINITY: 0}
    Q = INFINITY
    for m in range(1, size):
        Q = _add(Q, curve.G, curve)
        table[Q] = m
    return table


def _byte_table(curve: CurveParams) -> dict[Point, int]:
    return _decode_table(curve, min(256, curve.n))


def encode_byte(m: int, curve: CurveParams) -> Point:
    if not 0 <= m < 256 or m >= curve.n:
        raise UnencodableByteError(f"byte {m} cannot be encoded on {curve.name} (ord(G)={curve.n})")
    return scalar_mult(m, curve.G, curve)


def decode_byte(P: Point, curve: CurveParams) -> int:
    try:
        return _byte_table(curve)[P]
    except KeyError:
        raise DecryptionError(f"{P} is not the encoding of any byte") from None


def shared_scalar(K: Point, curve: CurveParams) -> int:
    """The discrete log of the group key point (toy-sized groups only)."""
    if not curve.contains(K):
        raise NotInSubgroupError(f"{K} is not on {curve.name}")
    s = dlog(K, curve)
    if s is None:
        raise NotInSubgroupError(f"{K} is not a multiple of G on {curve.name}")
    return s


def group_secret(K: Point, curve: CurveParams) -> int:
    """Scalar ``s`` with ``s*G`` used as the encryption key for group key point ``K``.

    On toy curves this is the discrete log of ``K`` itself, so ``s*G == K``.
    Where no dlog table can be built it falls back to ``x(K) mod n``, a value
    every key holder can compute.
    """
    try:
        return shared_scalar(K, curve)
    except TableTooLargeError:
        s = K.x % curve.n
        if s == 0:
            raise NotInSubgroupError(f"{K} yields a zero key scalar") from None
        return s


def _mask_secret(S_K: Point, curve: CurveParams, secret: int | None) -> int:
    if secret is not None:
        return secret % curve.n
    try:
        return shared_scalar(S_K, curve)
    except TableTooLargeError:
        raise DecryptionError(
            f"{curve.name} is too large for a dlog table; pass the key scalar explicitly"
        ) from None


def _pack_digits(msg: bytes, base: int) -> list[int]:
    v = int.from_bytes(bytes([_PACK_SENTINEL]) + msg, "big")
    digits = []
    while v:
        v, d = divmod(v, base)
        digits.append(d)
    return digits[::-1]


def _unpack_digits(digits: list[int], base: int) -> bytes:
    v = 0
    for d in digits:
        v = v * base + d
    raw = v.to_bytes((v.bit_length() + 7) // 8, "big")
    if not raw or raw[0] != _PACK_SENTINEL:
        raise DecryptionError("packed plaintext lost its sentinel (wrong key?)")
    return raw[1:]


def needs_packing(msg: bytes, curve: CurveParams) -> bool:
    return any(m >= curve.n for m in msg)


def encrypt(
    msg: bytes,
    S_K: Point | None,
    k_A: int,
    curve: CurveParams,
    packed: bool = False,
    secret: int | None = None,
) -> Ciphertext:
    """Header ``k_A*G``; body point ``m_i*G + k_A*S_K`` per byte (or packed digit).

    A sender that knows the key scalar may pass ``secret`` instead of
    ``S_K``; the mask is then ``(k_A*secret)*G``, the same point.
    """
    if not 0 < k_A % curve.n:
        raise ValueError("k_A must be nonzero mod n")
    metrics.record("encrypt")
    header = scalar_mult(k_A, curve.G, curve)
    if secret is not None:
        mask = scalar_mult(k_A * secret % curve.n, curve.G, curve)
    else:
        if S_K is None or not curve.contains(S_K):
            raise NotInSubgroupError(f"{S_K} is not on {curve.name}")
        mask = scalar_mult(k_A, S_K, curve)
    if packed:
        base = min(curve.n, PACKED_BASE_LIMIT)
        points = [scalar_mult(d, curve.G, curve) for d in _pack_digits(msg, base)]
    else:
        points = [encode_byte(m, curve) for m in msg]
    return Ciphertext(header, tuple(_add(P, mask, curve) for P in points), curve, packed)


def decrypt(ct: Ciphertext, S_K: Point | None, curve: CurveParams | None = None, secret: int | None = None) -> bytes:
    """Strip ``s*header`` from every body point and decode.

    ``s`` is the discrete log of ``S_K`` unless the key holder passes its
    ``secret`` directly (needed on curves too large for a dlog table).
    """
    curve = curve or ct.curve
    metrics.record("decrypt")
    s = _mask_secret(S_K, curve, secret)
    unmask = point_neg(scalar_mult(s, ct.header, curve), curve)
    plain = [_add(P, unmask, curve) for P in ct.body]
    if ct.packed:
        base = min(curve.n, PACKED_BASE_LIMIT)
        table = _decode_table(curve, base)
        try:
            digits = [table[P] for P in plain]
        except KeyError:
            raise DecryptionError("body point outside the digit table (wrong key?)") from None
        return _unpack_digits(digits, base)
    return bytes(decode_byte(P, curve) for P in plain)
