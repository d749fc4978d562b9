"""Contributory subgroup key agreement over an elliptic curve.

The regional key of a subgroup is ``(n_1 * n_2 * ... * n_m) * G`` where each
``n_i`` is one member's private scalar.  The controller (always the most
recent joiner) keeps, for every member ``i``, the partial product that omits
``n_i``; after a membership change it broadcasts those partials and each
member finishes the key with its own scalar.

All operations are pure: they take a :class:`SubgroupKeyState` and return a
new one together with the :class:`RekeyBroadcast` that members consume.
Computations that a real deployment would spread over several nodes (each
member multiplying by its own scalar during an upflow round) are executed
here in one place and charged to the active :mod:`~regionkey.metrics` meters
as the messages they would be.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Mapping

from . import metrics
from .ec import CurveParams, Point, scalar_mult
from .errors import (
    CurveError,
    DuplicateMemberError,
    GroupDissolvedError,
    NoSuchMemberError,
    NotAddressedError,
    RoleError,
    StaleEpochError,
)
from .wire import Reader, Writer


class Kind(IntEnum):
    JOIN = 1
    MEMBER_LEAVE = 2
    CONTROLLER_LEAVE = 3
    HANDOVER = 4
    UPFLOW = 5
    REQUEST = 6


@dataclass(frozen=True)
class Member:
    """A member's identity and private contribution (reduced mod n, never 0)."""

    member_id: str
    scalar: int
    curve: CurveParams

    def __post_init__(self) -> None:
        s = self.scalar % self.curve.n
        if s == 0:
            raise ValueError(f"{self.member_id}: private scalar is 0 mod n")
        object.__setattr__(self, "scalar", s)

    @cached_property
    def public(self) -> Point:
        return scalar_mult(self.scalar, self.curve.G, self.curve)


@dataclass(frozen=True)
class RekeyBroadcast:
    kind: Kind
    epoch: int
    curve: CurveParams
    partials: dict[str, Point]

    def to_bytes(self) -> bytes:
        return _encode(self.kind, self.epoch, self.curve, self.partials)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RekeyBroadcast":
        kind, epoch, curve, pairs = _decode(data)
        return cls(Kind(kind), epoch, curve, pairs)


@dataclass(frozen=True)
class Handover:
    """Old controller to newcomer on join: the partial table plus the current key."""

    epoch: int
    curve: CurveParams
    sub_products: dict[str, Point]
    regional_key: Point

    def to_bytes(self) -> bytes:
        pairs = dict(self.sub_products)
        pairs[_KEY_SLOT] = self.regional_key
        return _encode(Kind.HANDOVER, self.epoch, self.curve, pairs)


# id under which the handover message carries the current regional key
_KEY_SLOT = "*"


def _encode(kind: int, epoch: int, curve: CurveParams, pairs: Mapping[str, Point]) -> bytes:
    w = Writer().u8(kind).u32(epoch).str(curve.name).u32(len(pairs))
    for mid, P in pairs.items():
        w.str(mid).point(P, curve)
    return w.frame()


def _decode(data: bytes) -> tuple[int, int, CurveParams, dict[str, Point]]:
    r = Reader(data, framed=True)
    kind, epoch, curve = r.u8(), r.u32(), r.curve()
    pairs = {}
    for _ in range(r.u32()):
        mid = r.str()
        pairs[mid] = r.point(curve)
    r.done()
    return kind, epoch, curve, pairs


@dataclass(frozen=True)
class SubgroupKeyState:
    """Controller-side view of one subgroup.

    ``members`` is in join order; the controller is always the last entry.
    ``sub_products[i]`` is the product of every member's scalar except
    ``i``'s, times G, so ``n_i * sub_products[i] == regional_key``.
    """

    curve: CurveParams
    members: tuple[str, ...]
    sub_products: dict[str, Point] = field(repr=False)
    regional_key: Point
    epoch: int = 0

    @property
    def controller_id(self) -> str:
        return self.members[-1]

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, member_id: object) -> bool:
        return member_id in self.sub_products


def singleton(member: Member) -> SubgroupKeyState:
    """A one-member subgroup: the key is the member's public point."""
    return SubgroupKeyState(
        member.curve, (member.member_id,), {member.member_id: member.curve.G}, member.public
    )


def _broadcast(kind: Kind, state: SubgroupKeyState) -> RekeyBroadcast:
    partials = {m: state.sub_products[m] for m in state.members[:-1]}
    bc = RekeyBroadcast(kind, state.epoch, state.curve, partials)
    if partials:
        metrics.send(len(bc.to_bytes()), recipients=len(partials))
    return bc


def join(
    state: SubgroupKeyState,
    newcomer: Member,
    controller: Member | None = None,
    fresh_scalar: int | None = None,
) -> tuple[SubgroupKeyState, RekeyBroadcast]:
    """Admit ``newcomer``, who becomes the controller.

    With ``fresh_scalar`` (and the current ``controller``'s contribution) the
    outgoing controller first replaces its scalar before the handover;
    without it the outgoing controller keeps its scalar.
    """
    curve = state.curve
    if newcomer.curve != curve:
        raise CurveError("newcomer uses a different curve")
    if newcomer.member_id in state:
        raise DuplicateMemberError(newcomer.member_id)
    n = curve.n
    ctrl = state.controller_id
    metrics.send(len(Writer().u8(Kind.REQUEST).str(newcomer.member_id).frame()))

    subs = dict(state.sub_products)
    key = state.regional_key
    if fresh_scalar is not None:
        if controller is None or controller.member_id != ctrl:
            raise RoleError("refreshing on join needs the current controller's contribution")
        fresh = fresh_scalar % n
        if fresh == 0:
            raise ValueError("fresh scalar is 0 mod n")
        ratio = fresh * pow(controller.scalar, -1, n) % n
        for m in state.members[:-1]:
            subs[m] = scalar_mult(ratio, subs[m], curve)
        key = scalar_mult(fresh, subs[ctrl], curve)

    handover = Handover(state.epoch, curve, subs, key)
    metrics.send(len(handover.to_bytes()))

    s = newcomer.scalar
    new_subs = {m: scalar_mult(s, P, curve) for m, P in subs.items()}
    new_subs[newcomer.member_id] = key
    new_state = SubgroupKeyState(
        curve,
        state.members + (newcomer.member_id,),
        new_subs,
        scalar_mult(s, key, curve),
        state.epoch + 1,
    )
    return new_state, _broadcast(Kind.JOIN, new_state)


def init_pair(a: Member, b: Member) -> SubgroupKeyState:
    """Two-party start: ``b`` (the second joiner) ends up as controller."""
    if a.member_id == b.member_id:
        raise DuplicateMemberError(a.member_id)
    return join(singleton(a), b)[0]


def upflow(order: list[str], scalars: Mapping[str, int], curve: CurveParams) -> tuple[Point, dict[str, Point]]:
    """Collect round over ``order``; returns the key and every member's partial.

    The token handed from stage ``i`` to stage ``i+1`` holds the running
    product of the first ``i`` scalars times G and, for each of those
    members, the same product with that member's scalar left out.
    """
    running = curve.G
    partials: dict[str, Point] = {}
    for idx, mid in enumerate(order):
        s = scalars[mid]
        partials = {k: scalar_mult(s, P, curve) for k, P in partials.items()}
        partials[mid] = running
        running = scalar_mult(s, running, curve)
        if idx < len(order) - 1:
            token = dict(partials)
            token[_KEY_SLOT] = running
            metrics.send(len(_encode(Kind.UPFLOW, 0, curve, token)))
    return running, partials


def _rebuild(
    state: SubgroupKeyState,
    remaining: tuple[str, ...],
    fresh_scalar: int,
    scalars: Mapping[str, int],
    kind: Kind,
) -> tuple[SubgroupKeyState, RekeyBroadcast]:
    curve = state.curve
    fresh = fresh_scalar % curve.n
    if fresh == 0:
        raise ValueError("fresh scalar is 0 mod n")
    local = {m: scalars[m] % curve.n for m in remaining[:-1]}
    local[remaining[-1]] = fresh
    key, partials = upflow(list(remaining), local, curve)
    new_state = SubgroupKeyState(curve, remaining, partials, key, state.epoch + 1)
    return new_state, _broadcast(kind, new_state)


def member_leave(
    state: SubgroupKeyState,
    leaver_id: str,
    fresh_scalar: int,
    scalars: Mapping[str, int],
) -> tuple[SubgroupKeyState, RekeyBroadcast]:
    """Remove a non-controller member.

    The controller replaces its contribution with ``fresh_scalar`` and the
    remaining members (in join order, controller last) run an upflow round so
    that the new key no longer contains the leaver's scalar.  ``scalars``
    supplies each remaining member's own contribution for its upflow step.
    """
    if leaver_id not in state:
        raise NoSuchMemberError(leaver_id)
    if leaver_id == state.controller_id:
        raise RoleError(f"{leaver_id} is the controller; use controller_leave")
    metrics.send(len(Writer().u8(Kind.MEMBER_LEAVE).str(leaver_id).frame()))
    remaining = tuple(m for m in state.members if m != leaver_id)
    return _rebuild(state, remaining, fresh_scalar, scalars, Kind.MEMBER_LEAVE)


def controller_leave(
    state: SubgroupKeyState,
    fresh_scalar: int,
    scalars: Mapping[str, int],
) -> tuple[SubgroupKeyState, RekeyBroadcast]:
    """Remove the controller; the member who joined just before it takes over."""
    remaining = state.members[:-1]
    if not remaining:
        raise GroupDissolvedError(f"subgroup of {state.controller_id} is now empty")
    metrics.send(len(Writer().u8(Kind.CONTROLLER_LEAVE).str(state.controller_id).frame()))
    return _rebuild(state, remaining, fresh_scalar, scalars, Kind.CONTROLLER_LEAVE)


def recompute_key(member: Member, broadcast: RekeyBroadcast) -> Point:
    try:
        partial = broadcast.partials[member.member_id]
    except KeyError:
        raise NotAddressedError(f"broadcast carries no partial for {member.member_id}") from None
    return scalar_mult(member.scalar, partial, member.curve)


@dataclass(frozen=True)
class MemberView:
    """What one member knows: the latest epoch it accepted and the key from it."""

    epoch: int
    key: Point


def accept(view: MemberView | None, member: Member, broadcast: RekeyBroadcast) -> MemberView:
    """Apply ``broadcast`` to a member's view, rejecting replays and stale epochs."""
    if view is not None and broadcast.epoch <= view.epoch:
        raise StaleEpochError(f"epoch {broadcast.epoch} <= accepted epoch {view.epoch}")
    return MemberView(broadcast.epoch, recompute_key(member, broadcast))
