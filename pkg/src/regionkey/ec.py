"""Affine elliptic-curve arithmetic over small prime fields.

Curves are short Weierstrass ``y^2 = x^3 + a*x + b (mod p)``.  Everything here
is sized for toy and teaching parameters: orders are found by brute force and
discrete logarithms by table lookup.  None of it is constant time.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

from . import metrics
from .errors import CurveError, MalformedPointError, TableTooLargeError

#: largest prime modulus for which the order of G is found by iteration
BRUTE_FORCE_LIMIT = 1 << 24
#: largest group order for which :func:`dlog_table` will build a table
DLOG_TABLE_LIMIT = 1 << 20


class Point(NamedTuple):
    """An affine point; ``INFINITY`` (both coordinates ``None``) is the identity."""

    x: int | None
    y: int | None

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def __repr__(self) -> str:
        return "INFINITY" if self.x is None else f"({self.x},{self.y})"


INFINITY = Point(None, None)


def _is_prime(n: int) -> bool:
    # deterministic Miller-Rabin for n < 3.3e24
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class CurveParams:
    """Domain parameters ``E_p(a, b)`` with base point ``G`` of order ``n``.

    ``a`` and ``b`` may be given as any integers (``b=-4`` is fine); they are
    stored reduced mod ``p``.  When ``n`` is omitted it is computed by iterated
    addition, which is only allowed for ``p`` up to :data:`BRUTE_FORCE_LIMIT`.
    A supplied ``n`` is checked against ``n*G = INFINITY`` and the Hasse bound.
    """

    name: str
    p: int
    a: int
    b: int
    G: Point
    n: int = field(default=0)

    def __post_init__(self) -> None:
        p = self.p
        if p >= 1 << 64 or not _is_prime(p) or p < 5:
            raise CurveError(f"{self.name}: p={p} must be a prime in [5, 2^64)")
        a, b = self.a % p, self.b % p
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if (4 * a**3 + 27 * b * b) % p == 0:
            raise CurveError(f"{self.name}: singular curve (4a^3 + 27b^2 = 0 mod p)")
        G = Point(*self.G)
        object.__setattr__(self, "G", G)
        if G.is_infinity or not self.contains(G):
            raise CurveError(f"{self.name}: base point {G} is not on the curve")
        if self.n:
            lo, hi = hasse_bounds(p)
            if not (0 < self.n <= hi) or _mul(self.n, G, self) != INFINITY:
                raise CurveError(f"{self.name}: n={self.n} is not a valid order for G")
        else:
            object.__setattr__(self, "n", order_of(G, self))

    def contains(self, P: Point) -> bool:
        if P.x is None:
            return True
        x, y, p = P.x, P.y, self.p
        if not (0 <= x < p and 0 <= y < p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def scalar(self, k: int) -> int:
        """Reduce ``k`` into the scalar domain ``[0, n)``."""
        return k % self.n

    @property
    def field_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8


def hasse_bounds(p: int) -> tuple[int, int]:
    r = 2 * math.isqrt(p) + 2
    return p + 1 - r, p + 1 + r


def _check(P: Point, curve: CurveParams) -> None:
    if not curve.contains(P):
        raise MalformedPointError(f"{P} is not on {curve.name}")


def point_neg(P: Point, curve: CurveParams) -> Point:
    if P.x is None:
        return P
    return Point(P.x, (-P.y) % curve.p)


def _add(P: Point, Q: Point, curve: CurveParams) -> Point:
    if P.x is None:
        return Q
    if Q.x is None:
        return P
    p = curve.p
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return INFINITY
        lam = (3 * x1 * x1 + curve.a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return Point(x3, (lam * (x1 - x3) - y1) % p)


def point_add(P: Point, Q: Point, curve: CurveParams) -> Point:
    """Group law: chord for distinct points, tangent for doubling."""
    _check(P, curve)
    _check(Q, curve)
    return _add(P, Q, curve)


def point_sub(P: Point, Q: Point, curve: CurveParams) -> Point:
    return point_add(P, point_neg(Q, curve), curve)


def _mul(k: int, P: Point, curve: CurveParams) -> Point:
    if k < 0:
        k, P = -k, point_neg(P, curve)
    R = INFINITY
    while k:
        if k & 1:
            R = _add(R, P, curve)
        k >>= 1
        if k:
            P = _add(P, P, curve)
    return R


def scalar_mult(k: int, P: Point, curve: CurveParams) -> Point:
    """``k*P`` by left-to-right binary expansion (double-and-add)."""
    _check(P, curve)
    metrics.record("scalar_mults")
    return _mul(k, P, curve)


def order_of(P: Point, curve: CurveParams) -> int:
    """Smallest ``k > 0`` with ``k*P = INFINITY``, found by repeated addition."""
    if P.x is None:
        raise CurveError("the point at infinity has order 1 and no useful cyclic group")
    if curve.p > BRUTE_FORCE_LIMIT:
        raise CurveError(f"p={curve.p} is too large for brute-force order counting")
    _check(P, curve)
    bound = hasse_bounds(curve.p)[1]
    Q, k = P, 1
    while Q.x is not None:
        Q = _add(Q, P, curve)
        k += 1
        if k > bound:
            raise CurveError(f"order of {P} exceeds the Hasse bound {bound}")
    return k


@lru_cache(maxsize=8)
def dlog_table(curve: CurveParams) -> dict[Point, int]:
    """Map ``k*G -> k`` for ``0 <= k < n``."""
    if curve.n > DLOG_TABLE_LIMIT:
        raise TableTooLargeError(f"{curve.name}: n={curve.n} exceeds {DLOG_TABLE_LIMIT}")
    table = {INFINITY: 0}
    Q = curve.G
    for k in range(1, curve.n):
        table[Q] = k
        Q = _add(Q, curve.G, curve)
    return table


def dlog(P: Point, curve: CurveParams) -> int | None:
    return dlog_table(curve).get(P)


# ---------------------------------------------------------------- registry

E211 = CurveParams("e211", p=211, a=0, b=-4, G=Point(2, 2))
E751 = CurveParams("e751", p=751, a=1, b=188, G=Point(0, 376))
# prime-order curve over 2^31 - 1, used where collisions in a 241-element group
# would make inequality checks meaningless
TOY_31 = CurveParams(
    "toy-31",
    p=2147483647,
    a=1843546981,
    b=285990742,
    G=Point(1, 108093601),
    n=2147492959,
)

CURVES: dict[str, CurveParams] = {c.name: c for c in (E211, E751, TOY_31)}

#: environment variable naming a JSON file of extra curves for the registry
REGISTRY_ENV = "REGIONKEY_CURVES"


def curve_from_dict(d: dict) -> CurveParams:
    return CurveParams(
        d["name"], p=int(d["p"]), a=int(d["a"]), b=int(d["b"]),
        G=Point(int(d["gx"]), int(d["gy"])), n=int(d.get("n", 0)),
    )


def register(curve: CurveParams) -> CurveParams:
    existing = CURVES.get(curve.name)
    if existing is not None and existing != curve:
        raise CurveError(f"curve name {curve.name!r} already registered with other parameters")
    CURVES[curve.name] = curve
    return curve


def load_registry(path: str | os.PathLike) -> list[CurveParams]:
    """Register every curve in a JSON file (a list of objects with p, a, b, gx, gy[, n])."""
    with open(path) as fh:
        entries = json.load(fh)
    return [register(curve_from_dict(e)) for e in entries]


def get_curve(name: str) -> CurveParams:
    if name not in CURVES and os.environ.get(REGISTRY_ENV):
        load_registry(os.environ[REGISTRY_ENV])
    try:
        return CURVES[name]
    except KeyError:
        raise CurveError(f"unknown curve {name!r}; known: {', '.join(CURVES)}") from None
