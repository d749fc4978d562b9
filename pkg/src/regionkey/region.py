"""Region orchestration: subgroups, roles and membership-change dispatch.

Members are partitioned into subgroups of at most ``max_subgroup_size``.
Every subgroup agrees on a regional key with :mod:`~regionkey.gecdh`; its
most capable member is the gateway, and the gateways agree on the outer
group key with :mod:`~regionkey.tgecdh`.  :class:`Region` is a single-writer
state machine: all mutation goes through :meth:`Region.join` and
:meth:`Region.leave`, which return an :class:`EventRecord` describing what
was rekeyed and what it cost.

The region simulates every node, so it holds all private scalars.  Protocol
steps only ever use the scalar of the node performing them.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Callable, Iterable

from . import gecdh, metrics, tgecdh
from .ec import E211, E751, CurveParams, Point
from .errors import (
    DegenerateKeyError,
    DuplicateMemberError,
    NoSuchMemberError,
    RegionKeyError,
    UndeliverableError,
)
from .gecdh import Member

#: attempts at a tree rekey before giving up on degenerate node keys
MAX_REKEY_ATTEMPTS = 32


@dataclass(frozen=True)
class NodeProfile:
    member_id: str
    processing: int = 0
    memory: int = 0
    battery: int = 0

    def __post_init__(self) -> None:
        if min(self.processing, self.memory, self.battery) < 0:
            raise ValueError(f"{self.member_id}: capability units must be >= 0")


@total_ordering
class _Desc:
    """Wraps a string so that smaller strings compare as larger."""

    __slots__ = ("s",)

    def __init__(self, s: str) -> None:
        self.s = s

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _Desc) and self.s == other.s

    def __lt__(self, other: "_Desc") -> bool:
        return self.s > other.s

    def __repr__(self) -> str:
        return f"_Desc({self.s!r})"


def capability_score(p: NodeProfile) -> tuple:
    """Lexicographic (processing, memory, battery); ties go to the smaller id."""
    return (p.processing, p.memory, p.battery, _Desc(p.member_id))


def most_capable(profiles: Iterable[NodeProfile]) -> NodeProfile:
    return max(profiles, key=capability_score)


@dataclass
class RegionConfig:
    max_subgroup_size: int = 99
    refresh_on_join: bool = False
    tree_insert: str = "root"
    eager_gateway: bool = False
    subgroup_curve: CurveParams = E211
    outer_curve: CurveParams = E751

    def __post_init__(self) -> None:
        if not 2 <= self.max_subgroup_size <= 99:
            raise ValueError("max_subgroup_size must lie in [2, 99] (N/S < 100)")
        if self.tree_insert not in tgecdh.POLICIES:
            raise ValueError(f"tree_insert must be one of {tgecdh.POLICIES}")


@dataclass
class Subgroup:
    sid: int
    state: gecdh.SubgroupKeyState
    gateway: str

    @property
    def members(self) -> tuple[str, ...]:
        return self.state.members

    @property
    def controller(self) -> str:
        return self.state.controller_id


@dataclass
class EventRecord:
    """One membership event: what changed and what it cost."""

    kind: str
    member: str
    tick: int = 0
    kr_epochs: dict[int, int] = field(default_factory=dict)
    kg_epoch: int | None = None
    counts: dict[str, int] = field(default_factory=dict)
    broadcasts: list = field(default_factory=list, repr=False)

    def log_line(self) -> str:
        kr = ",".join(f"s{sid}@{e}" for sid, e in self.kr_epochs.items()) or "-"
        kg = "-" if self.kg_epoch is None else str(self.kg_epoch)
        return (f"{self.tick} {self.kind} {self.member} kr={kr} kg={kg} "
                f"messages={self.counts.get('messages', 0)} "
                f"scalar_mults={self.counts.get('scalar_mults', 0)}")


class Region:
    """All subgroups of one region plus the outer group linking their gateways."""

    def __init__(self, config: RegionConfig | None = None, rng: random.Random | None = None) -> None:
        self.config = config or RegionConfig()
        self.rng = rng or random.Random(0)
        self.profiles: dict[str, NodeProfile] = {}
        self.scalars: dict[str, int] = {}
        self.tree_scalars: dict[str, int] = {}
        self.subgroups: dict[int, Subgroup] = {}
        self.member_subgroup: dict[str, int] = {}
        self.outer: tgecdh.OuterGroupState | None = None
        self.kr_views: dict[str, gecdh.MemberView] = {}
        self.kg_views: dict[str, tgecdh.OuterView] = {}
        self.log: list[EventRecord] = []
        self.tick = 0
        #: delivery filter: return True to drop a rekey broadcast at that member
        self.drop: Callable[[str], bool] = lambda member_id: False
        self._next_sid = 0

    # ------------------------------------------------------------ helpers

    @property
    def kr_curve(self) -> CurveParams:
        return self.config.subgroup_curve

    @property
    def kg_curve(self) -> CurveParams:
        return self.config.outer_curve

    def _fresh(self, curve: CurveParams) -> int:
        return self.rng.randrange(1, curve.n)

    def _member(self, mid: str) -> Member:
        return Member(mid, self.scalars[mid], self.kr_curve)

    def _gateway_member(self, mid: str) -> Member:
        return Member(mid, self.tree_scalars[mid], self.kg_curve)

    def subgroup_of(self, mid: str) -> Subgroup:
        try:
            return self.subgroups[self.member_subgroup[mid]]
        except KeyError:
            raise NoSuchMemberError(mid) from None

    def __contains__(self, mid: object) -> bool:
        return mid in self.member_subgroup

    @property
    def members(self) -> list[str]:
        return list(self.member_subgroup)

    @property
    def gateways(self) -> list[str]:
        return [sg.gateway for sg in self.subgroups.values()]

    def role(self, mid: str) -> str:
        sg = self.subgroup_of(mid)
        if self.outer is not None and self.outer.controller_id == mid:
            return "outer-controller"
        if sg.gateway == mid:
            return "gateway"
        if sg.controller == mid:
            return "controller"
        return "member"

    def regional_key(self, mid: str) -> Point | None:
        view = self.kr_views.get(mid)
        return None if view is None else view.key

    def outer_key(self, mid: str) -> int | None:
        view = self.kg_views.get(mid)
        return None if view is None else view.key

    # ------------------------------------------------------------ delivery

    def _deliver_kr(self, sg: Subgroup, bc: gecdh.RekeyBroadcast | None, rec: EventRecord) -> None:
        st = sg.state
        self.kr_views[st.controller_id] = gecdh.MemberView(st.epoch, st.regional_key)
        rec.kr_epochs[sg.sid] = st.epoch
        if bc is None:
            return
        rec.broadcasts.append(("kr", sg.sid, bc))
        for mid in bc.partials:
            if self.drop(mid):
                continue
            self.kr_views[mid] = gecdh.accept(self.kr_views.get(mid), self._member(mid), bc)

    def _deliver_kg(self, bc: tgecdh.TreeBroadcast | None, rec: EventRecord) -> None:
        outer = self.outer
        self.kg_views[outer.controller_id] = tgecdh.OuterView(outer.epoch, outer.root_key)
        rec.kg_epoch = outer.epoch
        if bc is None:
            return
        rec.broadcasts.append(("kg", None, bc))
        for mid in outer.join_order[:-1]:
            if self.drop(mid):
                continue
            self.kg_views[mid] = tgecdh.accept(self.kg_views.get(mid), self._gateway_member(mid), bc)

    # ------------------------------------------------------------ outer group

    def _outer_add(self, gw: str, rec: EventRecord) -> None:
        if self.outer is None:
            self.tree_scalars[gw] = self._fresh(self.kg_curve)
            self.outer = tgecdh.create(self._gateway_member(gw), self.config.tree_insert)
            self._deliver_kg(None, rec)
            return
        old = self.outer.controller_id
        for _ in range(MAX_REKEY_ATTEMPTS):
            mine, theirs = self._fresh(self.kg_curve), self._fresh(self.kg_curve)
            try:
                state, bc = tgecdh.join_gateway(self.outer, Member(gw, mine, self.kg_curve), theirs)
            except DegenerateKeyError:
                continue
            break
        else:
            raise RegionKeyError("outer join kept producing degenerate node keys")
        self.tree_scalars[gw], self.tree_scalars[old] = mine, theirs
        self.outer = state
        self._deliver_kg(bc, rec)

    def _outer_remove(self, gw: str, rec: EventRecord) -> None:
        outer = self.outer
        self.kg_views.pop(gw, None)
        if len(outer) == 1:
            self.outer = None
            self.tree_scalars.pop(gw, None)
            return
        is_ctrl = outer.controller_id == gw
        successor = outer.join_order[-2] if is_ctrl else outer.controller_id
        sponsor = tgecdh.find_sponsor(outer, gw, successor)
        scalars = dict(self.tree_scalars)
        for attempt in range(MAX_REKEY_ATTEMPTS):
            fresh = self._fresh(self.kg_curve)
            if attempt and sponsor is not None:
                # the degenerate key may sit on the sponsor's path
                scalars[sponsor] = self._fresh(self.kg_curve)
            try:
                if is_ctrl:
                    state, bc = tgecdh.leave_controller(outer, fresh, scalars)
                else:
                    state, bc = tgecdh.leave_gateway(outer, gw, fresh, scalars)
            except DegenerateKeyError:
                continue
            break
        else:
            raise RegionKeyError("outer leave kept producing degenerate node keys")
        del scalars[gw]
        scalars[successor] = fresh
        self.tree_scalars = scalars
        self.outer = state
        self._deliver_kg(bc, rec)

    # ------------------------------------------------------------ events

    def _record(self, kind: str, mid: str) -> EventRecord:
        return EventRecord(kind, mid, tick=self.tick)

    def join(self, profile: NodeProfile) -> EventRecord:
        """A new member joins the least-full subgroup, or founds a new one."""
        mid = profile.member_id
        if mid in self:
            raise DuplicateMemberError(mid)
        rec = self._record("join", mid)
        with metrics.metered() as meter:
            self.profiles[mid] = profile
            self.scalars[mid] = self._fresh(self.kr_curve)
            open_groups = [sg for sg in self.subgroups.values() if len(sg.members) < self.config.max_subgroup_size]
            if not open_groups:
                sg = self._found_subgroup(mid, rec)
            else:
                sg = min(open_groups, key=lambda g: (len(g.members), g.sid))
                self._join_subgroup(sg, mid, rec)
                if self.config.eager_gateway and capability_score(profile) > capability_score(self.profiles[sg.gateway]):
                    self._replace_gateway(sg, mid, rec)
        rec.counts = meter.snapshot()
        self.log.append(rec)
        return rec

    def _found_subgroup(self, mid: str, rec: EventRecord) -> Subgroup:
        sg = Subgroup(self._next_sid, gecdh.singleton(self._member(mid)), mid)
        self._next_sid += 1
        self.subgroups[sg.sid] = sg
        self.member_subgroup[mid] = sg.sid
        self._deliver_kr(sg, None, rec)
        self._outer_add(mid, rec)
        return sg

    def _join_subgroup(
        self, sg: Subgroup, mid: str, rec: EventRecord, deliver: bool = True
    ) -> gecdh.RekeyBroadcast:
        old_ctrl = sg.controller
        if self.config.refresh_on_join:
            fresh = self._fresh(self.kr_curve)
            sg.state, bc = gecdh.join(sg.state, self._member(mid), self._member(old_ctrl), fresh)
            self.scalars[old_ctrl] = fresh % self.kr_curve.n
        else:
            sg.state, bc = gecdh.join(sg.state, self._member(mid))
        self.member_subgroup[mid] = sg.sid
        if deliver:
            self._deliver_kr(sg, bc, rec)
        return bc

    def _replace_gateway(self, sg: Subgroup, new_gw: str, rec: EventRecord) -> None:
        old = sg.gateway
        sg.gateway = new_gw
        self._outer_remove(old, rec)
        self.tree_scalars.pop(old, None)
        self._outer_add(new_gw, rec)

    def leave(self, mid: str) -> EventRecord:
        """Dispatch a departure to exactly one of the four leave procedures."""
        sg = self.subgroup_of(mid)
        kind = {
            "outer-controller": "outer-controller-leave",
            "gateway": "gateway-leave",
            "controller": "controller-leave",
            "member": "member-leave",
        }[self.role(mid)]
        rec = self._record(kind, mid)
        with metrics.metered() as meter:
            st = sg.state
            if len(st) == 1:
                del self.subgroups[sg.sid]
                rec.kind += "+dissolve"
            else:
                fresh = self._fresh(self.kr_curve)
                if mid == st.controller_id:
                    sg.state, bc = gecdh.controller_leave(st, fresh, self.scalars)
                else:
                    sg.state, bc = gecdh.member_leave(st, mid, fresh, self.scalars)
                self.scalars[sg.controller] = fresh
                self._deliver_kr(sg, bc, rec)

            del self.member_subgroup[mid]
            del self.scalars[mid]
            self.kr_views.pop(mid, None)
            self.profiles.pop(mid)

            if sg.gateway == mid:
                self._outer_remove(mid, rec)
                self.tree_scalars.pop(mid, None)
                if sg.sid in self.subgroups:
                    sg.gateway = most_capable(self.profiles[m] for m in sg.members).member_id
                    self._outer_add(sg.gateway, rec)
        rec.counts = meter.snapshot()
        self.log.append(rec)
        return rec

    # ------------------------------------------------------------ checks

    def check_agreement(self) -> None:
        """Raise if any live member disagrees with its controller."""
        for sg in self.subgroups.values():
            for mid in sg.members:
                view = self.kr_views.get(mid)
                if view is None or view.key != sg.state.regional_key or view.epoch != sg.state.epoch:
                    raise UndeliverableError(f"{mid} does not hold the current key of subgroup {sg.sid}")
        if self.outer is not None:
            for gw in self.outer.join_order:
                view = self.kg_views.get(gw)
                if view is None or view.key != self.outer.root_key or view.epoch != self.outer.epoch:
                    raise UndeliverableError(f"gateway {gw} does not hold the current outer key")

    def stored_keys(self, mid: str) -> int:
        """Keys a node keeps: own scalar and regional key, the controller's
        partial table, and a gateway's tree path and co-path."""
        sg = self.subgroup_of(mid)
        count = 2
        if sg.controller == mid:
            count += len(sg.members)
        if self.outer is not None and mid in self.outer:
            count += tgecdh.stored_keys(self.outer, mid)
        return count


def subgroup_sizes(n: int, max_size: int) -> list[int]:
    """Balanced split of ``n`` members into ``ceil(n / max_size)`` subgroups."""
    s = math.ceil(n / max_size)
    base, extra = divmod(n, s)
    return [base + 1 if i < extra else base for i in range(s)]


def form_subgroups(
    profiles: list[NodeProfile],
    config: RegionConfig | None = None,
    rng: random.Random | None = None,
) -> Region:
    """Initial grouping: contiguous, balanced subgroups filled in member order."""
    if len(profiles) < 2:
        raise RegionKeyError("at least two members are needed to form a group")
    region = Region(config, rng)
    rec = region._record("form", f"{len(profiles)} members")
    with metrics.metered() as meter:
        pos = 0
        for size in subgroup_sizes(len(profiles), region.config.max_subgroup_size):
            chunk = profiles[pos:pos + size]
            pos += size
            first = chunk[0].member_id
            if first in region:
                raise DuplicateMemberError(first)
            region.profiles[first] = chunk[0]
            region.scalars[first] = region._fresh(region.kr_curve)
            sg = Subgroup(region._next_sid, gecdh.singleton(region._member(first)), first)
            region._next_sid += 1
            region.subgroups[sg.sid] = sg
            region.member_subgroup[first] = sg.sid
            bc = None
            for p in chunk[1:]:
                if p.member_id in region:
                    raise DuplicateMemberError(p.member_id)
                region.profiles[p.member_id] = p
                region.scalars[p.member_id] = region._fresh(region.kr_curve)
                bc = region._join_subgroup(sg, p.member_id, rec, deliver=False)
            # intermediate broadcasts are superseded at once; members act on the last
            region._deliver_kr(sg, bc, rec)
            sg.gateway = most_capable(chunk).member_id
        for sg in region.subgroups.values():
            region._outer_add(sg.gateway, rec)
    rec.counts = meter.snapshot()
    region.log.append(rec)
    return region
