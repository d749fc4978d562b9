"""Deterministic discrete-event simulation of a region.

:class:`Network` moves application payloads over the encrypted channels:
inside a subgroup under the regional key, between subgroups through the
gateways under the outer group key.  Every transmission is metered and its
on-wire bytes are kept in :attr:`Network.wire` for inspection.

:func:`run_scenario` drives a :class:`Network` from a line-oriented script::

    # tick EVENT args...
    0  FORM m1:3:2:1 m2 m3 m4
    10 JOIN m7 proc=4 mem=2 bat=9
    25 QUERY m3 name dh1.png

Events run in (tick, line) order.  All randomness (private scalars,
per-message ElGamal scalars, optional drops) comes from one seeded generator,
so a script and a seed fully determine the trace.
"""

from __future__ import annotations

import csv
import heapq
import io
import random
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import metrics, p2p
from .ec import CurveParams, get_curve
from .errors import (
    DecryptionError,
    KeyNotReadyError,
    RegionKeyError,
    ScenarioParseError,
    UndeliverableError,
)
from .message import Ciphertext, decrypt, encrypt, group_secret, needs_packing
from .region import NodeProfile, Region, RegionConfig, form_subgroups
from .wire import Writer

TRACE_HEADER = ("tick", "event", "messages", "bytes", "scalar_mults")
KR, KG = "kr", "kg"


@dataclass(frozen=True)
class WireRecord:
    tick: int
    kind: str
    src: str
    dst: str
    data: bytes


@dataclass
class TraceRecord:
    tick: int
    event: str
    messages: int
    bytes: int
    scalar_mults: int
    keys_stored: dict[str, int] = field(default_factory=dict, repr=False)
    counts: dict[str, int] = field(default_factory=dict, repr=False)
    note: str = ""

    def row(self) -> tuple:
        return (self.tick, self.event, self.messages, self.bytes, self.scalar_mults)


def _envelope(kind: str, src: str, dst: str, scope: str, epoch: int, ct: Ciphertext) -> bytes:
    w = Writer().str(kind).str(src).str(dst).str(scope).u32(epoch).raw(ct.to_bytes())
    return w.frame()


class Network:
    """Encrypted message delivery over a :class:`Region`."""

    def __init__(self, region: Region, rng: random.Random | None = None, drop_rate: float = 0.0) -> None:
        self.region = region
        self.rng = rng or region.rng
        self.drop_rate = drop_rate
        self.tick = 0
        self.wire: list[WireRecord] = []
        self.failures: list[tuple[int, str, str]] = []
        if drop_rate:
            region.drop = lambda mid: self._dropped()

    # ------------------------------------------------------------ keys

    def _dropped(self) -> bool:
        return bool(self.drop_rate) and self.rng.random() < self.drop_rate

    def _key(self, scope: str, mid: str) -> tuple[int, int, CurveParams]:
        """(epoch, secret, curve) of the channel key ``mid`` currently holds."""
        r = self.region
        if scope == KR:
            view = r.kr_views.get(mid)
            if view is None:
                raise KeyNotReadyError(f"{mid} has no regional key")
            return view.epoch, group_secret(view.key, r.kr_curve), r.kr_curve
        view = r.kg_views.get(mid)
        if view is None:
            raise KeyNotReadyError(f"{mid} holds no outer group key")
        return view.epoch, view.key, r.kg_curve

    def _seal(self, scope: str, mid: str, plaintext: bytes) -> tuple[int, Ciphertext]:
        epoch, s, curve = self._key(scope, mid)
        metrics.record(f"{scope}_encrypt")
        k = self.rng.randrange(1, curve.n)
        return epoch, encrypt(plaintext, None, k, curve, packed=needs_packing(plaintext, curve), secret=s)

    def _open(self, scope: str, mid: str, ct: Ciphertext, expected: bytes) -> bytes | None:
        metrics.record(f"{scope}_decrypt")
        try:
            _, s, curve = self._key(scope, mid)
            got = decrypt(ct, None, curve, secret=s)
        except (DecryptionError, KeyNotReadyError):
            got = None
        if got != expected:
            # stale or missing key: the member cannot read this message
            metrics.record("decrypt_failures")
            self.failures.append((self.tick, mid, scope))
            return None
        return got

    def _transmit(self, kind: str, src: str, dst: str, scope: str, epoch: int,
                  ct: Ciphertext, recipients: int) -> None:
        data = _envelope(kind, src, dst, scope, epoch, ct)
        metrics.send(len(data), recipients)
        self.wire.append(WireRecord(self.tick, kind, src, dst, data))

    # ------------------------------------------------------------ flows

    def multicast_region(self, sender: str, plaintext: bytes, kind: str = "data") -> dict[str, bytes]:
        """One encryption under KR, one multicast, one decryption per other member."""
        sg = self.region.subgroup_of(sender)
        epoch, ct = self._seal(KR, sender, plaintext)
        others = [m for m in sg.members if m != sender]
        self._transmit(kind, sender, f"s{sg.sid}", KR, epoch, ct, len(others))
        got = {}
        for mid in others:
            if self._dropped():
                continue
            pt = self._open(KR, mid, ct, plaintext)
            if pt is not None:
                got[mid] = pt
        return got

    def _kr_unicast(self, src: str, dst: str, plaintext: bytes, kind: str) -> bytes | None:
        epoch, ct = self._seal(KR, src, plaintext)
        self._transmit(kind, src, dst, KR, epoch, ct, 1)
        if self._dropped():
            return None
        return self._open(KR, dst, ct, plaintext)

    def kg_unicast(self, src: str, dst: str, plaintext: bytes, kind: str = "data") -> bytes | None:
        epoch, ct = self._seal(KG, src, plaintext)
        self._transmit(kind, src, dst, KG, epoch, ct, 1)
        if self._dropped():
            return None
        return self._open(KG, dst, ct, plaintext)

    def kg_multicast(self, src: str, plaintext: bytes, kind: str = "data") -> dict[str, bytes]:
        """From one gateway to every other gateway under KG."""
        outer = self.region.outer
        others = [g for g in outer.join_order if g != src]
        epoch, ct = self._seal(KG, src, plaintext)
        self._transmit(kind, src, "outer", KG, epoch, ct, len(others))
        got = {}
        for gw in others:
            if self._dropped():
                continue
            pt = self._open(KG, gw, ct, plaintext)
            if pt is not None:
                got[gw] = pt
        return got

    def relay_inter_region(self, sender: str, recipient: str, plaintext: bytes, kind: str = "data") -> bytes | None:
        """Sender -> own gateway (KR), gateway -> gateway (KG), gateway -> recipient (KR).

        That is three encryptions and three decryptions.  A hop whose two
        ends coincide (the sender or recipient is itself a gateway) is skipped.
        """
        r = self.region
        src_sg, dst_sg = r.subgroup_of(sender), r.subgroup_of(recipient)
        if src_sg.sid == dst_sg.sid:
            return self._kr_unicast(sender, recipient, plaintext, kind)
        g1, g2 = src_sg.gateway, dst_sg.gateway
        if r.outer is None or g1 not in r.outer or g2 not in r.outer:
            raise UndeliverableError(f"no gateway path from s{src_sg.sid} to s{dst_sg.sid}")
        data: bytes | None = plaintext
        if sender != g1:
            data = self._kr_unicast(sender, g1, data, kind)
        if data is not None:
            data = self.kg_unicast(g1, g2, data, kind)
        if data is not None and recipient != g2:
            data = self._kr_unicast(g2, recipient, data, kind)
        return data

    def send(self, sender: str, recipient: str, plaintext: bytes, kind: str = "data") -> bytes | None:
        return self.relay_inter_region(sender, recipient, plaintext, kind)

    def broadcast_all(self, sender: str, plaintext: bytes, kind: str = "data") -> dict[str, bytes]:
        """Reach every member: own subgroup, then all gateways, then their subgroups."""
        r = self.region
        got = self.multicast_region(sender, plaintext, kind)
        g1 = r.subgroup_of(sender).gateway
        if r.outer is None or len(r.outer) < 2:
            return got
        if g1 != sender and g1 not in got:
            return got
        for gw, data in self.kg_multicast(g1, plaintext, kind).items():
            got[gw] = data
            got.update(self.multicast_region(gw, data, kind))
        return got


# ---------------------------------------------------------------- scenarios

@dataclass
class _Line:
    tick: int
    seq: int
    lineno: int
    event: str
    args: list[str]

    def __lt__(self, other: "_Line") -> bool:
        return (self.tick, self.seq) < (other.tick, other.seq)


def parse_scenario(text: str) -> list[_Line]:
    lines = []
    last_tick = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioParseError(lineno, str(exc)) from None
        if not tokens:
            continue
        if len(tokens) < 2:
            raise ScenarioParseError(lineno, "expected '<tick> <EVENT> [args...]'")
        try:
            tick = int(tokens[0])
        except ValueError:
            raise ScenarioParseError(lineno, f"tick must be an integer, got {tokens[0]!r}") from None
        if tick < 0 or (last_tick is not None and tick < last_tick):
            raise ScenarioParseError(lineno, f"tick {tick} goes backwards")
        last_tick = tick
        event = tokens[1].upper()
        if event not in _HANDLERS:
            raise ScenarioParseError(lineno, f"unknown event {tokens[1]!r}")
        lines.append(_Line(tick, len(lines), lineno, event, tokens[2:]))
    return lines


def _split_kv(args: list[str]) -> tuple[list[str], dict[str, str]]:
    pos, kv = [], {}
    for a in args:
        if "=" in a:
            k, v = a.split("=", 1)
            kv[k] = v
        else:
            pos.append(a)
    return pos, kv


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _profile(token: str, kv: dict[str, str] | None = None) -> NodeProfile:
    """``id`` or ``id:proc:mem:bat``, optionally with proc=/mem=/bat= overrides."""
    mid, *caps = token.split(":")
    if len(caps) not in (0, 3):
        raise ValueError(f"member token {token!r} must be id or id:proc:mem:bat")
    proc, mem, bat = (int(c) for c in caps) if caps else (0, 0, 0)
    kv = kv or {}
    return NodeProfile(mid, int(kv.get("proc", proc)), int(kv.get("mem", mem)), int(kv.get("bat", bat)))


class Simulation:
    """State carried across the events of one scenario run."""

    def __init__(self, seed: int = 0, config: RegionConfig | None = None, drop_rate: float = 0.0,
                 horizon: int = p2p.DEFAULT_HORIZON) -> None:
        self.rng = random.Random(seed)
        self.config = config or RegionConfig()
        self.drop_rate = drop_rate
        self.horizon = horizon
        self.net: Network | None = None
        self.share: p2p.ShareLayer | None = None
        self.trace: list[TraceRecord] = []
        self.log: list[str] = []
        self.pending: list[tuple[str, dict]] = []

    @property
    def region(self) -> Region:
        if self.net is None:
            raise KeyNotReadyError("no group formed yet (use FORM or JOIN first)")
        return self.net.region

    def _attach(self, region: Region) -> None:
        self.net = Network(region, self.rng, self.drop_rate)
        self.share = p2p.ShareLayer(self.net, self.horizon)
        for owner, kw in self.pending:
            self.share.publish(owner, **kw)
        self.pending.clear()

    def _note_rekeys(self, start: int) -> None:
        # rekey broadcasts are on the wire too
        for rec in self.region.log[start:]:
            for scope, _, bc in rec.broadcasts:
                self.net.wire.append(WireRecord(self.net.tick, f"rekey-{scope}", rec.member, "*", bc.to_bytes()))
            self.log.append(rec.log_line())

    def membership(self, fn: Callable[[Region], object]) -> None:
        start = len(self.region.log)
        self.region.tick = self.net.tick
        fn(self.region)
        self._note_rekeys(start)

    def keys_stored(self) -> dict[str, int]:
        if self.net is None:
            return {}
        return {m: self.region.stored_keys(m) for m in self.region.members}


# handlers take (sim, positional args, key=value args) and return a note for the log

def _h_curve(sim: Simulation, pos: list[str], kv: dict) -> str:
    if sim.net is not None:
        raise ValueError("CURVE must come before the group is formed")
    if not 1 <= len(pos) <= 2:
        raise ValueError("CURVE <subgroup-curve> [<outer-curve>]")
    sim.config.subgroup_curve = get_curve(pos[0])
    sim.config.outer_curve = get_curve(pos[-1])
    return f"subgroup={pos[0]} outer={pos[-1]}"


def _h_config(sim: Simulation, pos: list[str], kv: dict) -> str:
    if pos:
        raise ValueError(f"CONFIG takes key=value pairs, got {pos}")
    for k, v in kv.items():
        if k == "drop_rate":
            sim.drop_rate = float(v)
            if sim.net is not None:
                sim.net.drop_rate = sim.drop_rate
        elif k == "horizon":
            sim.horizon = int(v)
        elif sim.net is not None:
            raise ValueError(f"{k} can only be set before the group is formed")
        elif k == "max_subgroup_size":
            sim.config.max_subgroup_size = int(v)
        elif k in ("refresh_on_join", "eager_gateway"):
            setattr(sim.config, k, _bool(v))
        elif k == "tree_insert":
            sim.config.tree_insert = v
        else:
            raise ValueError(f"unknown CONFIG key {k!r}")
    sim.config.__post_init__()
    return " ".join(f"{k}={v}" for k, v in kv.items())


def _h_form(sim: Simulation, pos: list[str], kv: dict) -> str:
    if sim.net is not None:
        raise ValueError("group already formed")
    if "n" in kv:
        prefix = kv.get("prefix", "m")
        pos = pos + [f"{prefix}{i}" for i in range(1, int(kv["n"]) + 1)]
    profiles = [_profile(t) for t in pos]
    region = form_subgroups(profiles, sim.config, sim.rng)
    sim._attach(region)
    sim._note_rekeys(0)
    return f"{len(profiles)} members in {len(region.subgroups)} subgroups"


def _h_join(sim: Simulation, pos: list[str], kv: dict) -> str:
    if len(pos) != 1:
        raise ValueError("JOIN <member> [proc=] [mem=] [bat=]")
    prof = _profile(pos[0], kv)
    if sim.net is None:
        region = Region(sim.config, sim.rng)
        sim._attach(region)
    sim.membership(lambda r: r.join(prof))
    return prof.member_id


_ROLE_EVENTS = {
    "LEAVE": None,
    "CONTROLLER_LEAVE": "controller",
    "GATEWAY_LEAVE": "gateway",
    "OUTER_CONTROLLER_LEAVE": "outer-controller",
}


def _holder(region: Region, role: str, selector: str | None) -> str:
    """The member holding ``role``: named directly, or picked by subgroup ``sN``."""
    if role == "outer-controller":
        if region.outer is None:
            raise ValueError("there is no outer group")
        mid = region.outer.controller_id
        if selector is not None and selector != mid:
            raise ValueError(f"{selector} is not the outer controller ({mid} is)")
        return mid
    if selector in region:
        sg = region.subgroup_of(selector)
        if selector != (sg.controller if role == "controller" else sg.gateway):
            raise ValueError(f"{selector} is not the {role} of s{sg.sid}")
        return selector
    if selector and selector[:1] == "s" and selector[1:].isdigit() and int(selector[1:]) in region.subgroups:
        sg = region.subgroups[int(selector[1:])]
        return sg.controller if role == "controller" else sg.gateway
    raise ValueError(f"{selector!r} is neither a member nor a subgroup (sN)")


def _make_leave(event: str):
    role = _ROLE_EVENTS[event]

    def handler(sim: Simulation, pos: list[str], kv: dict) -> str:
        if len(pos) > 1:
            raise ValueError(f"{event} [<member>|sN]")
        if role is None:
            if not pos:
                raise ValueError("LEAVE <member>")
            mid = pos[0]
            if mid not in sim.region:
                raise ValueError(f"no member {mid!r}")
        else:
            mid = _holder(sim.region, role, pos[0] if pos else None)
        sim.membership(lambda r: r.leave(mid))
        if sim.share is not None:
            sim.share.forget(mid)
        return mid

    return handler


def _content(kv: dict, rng: random.Random) -> bytes:
    if "content" in kv:
        return kv["content"].encode()
    if "hex" in kv:
        return bytes.fromhex(kv["hex"])
    if "size" in kv:
        return rng.randbytes(int(kv["size"]))
    raise ValueError("PUBLISH needs content=, hex= or size=")


def _h_publish(sim: Simulation, pos: list[str], kv: dict) -> str:
    if len(pos) != 2:
        raise ValueError("PUBLISH <member> <name> content=...|hex=...|size=N [path=...]")
    owner, name = pos
    item = dict(name=name, content=_content(kv, sim.rng), path=kv.get("path"))
    if sim.share is None:
        sim.pending.append((owner, item))
    else:
        if owner not in sim.region:
            raise ValueError(f"no member {owner!r}")
        sim.share.publish(owner, **item)
    return f"{owner} {name} ({len(item['content'])} bytes)"


def _h_query(sim: Simulation, pos: list[str], kv: dict) -> str:
    if len(pos) != 3 or pos[1] not in (p2p.NAME, p2p.CONTENT):
        raise ValueError("QUERY <member> name|content <needle> [scope=local|global] [substring=1]")
    origin, kind, needle = pos
    responses = sim.share.query(
        origin, kind, needle, scope=kv.get("scope", "global"), substring=_bool(kv.get("substring", "0"))
    )
    found = ",".join(f"{r.responder}:{m['name']}" for r in responses for m in r.matches) or "none"
    return f"{origin} {kind}={needle!r} responses={len(responses)} [{found}]"


def _h_transfer(sim: Simulation, pos: list[str], kv: dict) -> str:
    if len(pos) != 3:
        raise ValueError("TRANSFER <member> <responder> <name>")
    origin, responder, name = pos
    data = sim.share.transfer(origin, responder, name)
    return f"{origin} <- {responder}:{name} ({len(data)} bytes)"


def _h_send(sim: Simulation, pos: list[str], kv: dict) -> str:
    if len(pos) != 3:
        raise ValueError("SEND <member> <recipient>|subgroup|all <text>")
    sender, dest, text = pos
    data = text.encode()
    if dest == "subgroup":
        got = sim.net.multicast_region(sender, data)
        return f"{sender} -> subgroup: {len(got)} delivered"
    if dest == "all":
        got = sim.net.broadcast_all(sender, data)
        return f"{sender} -> all: {len(got)} delivered"
    if dest not in sim.region:
        raise ValueError(f"no member {dest!r}")
    ok = sim.net.send(sender, dest, data) == data
    return f"{sender} -> {dest}: {'delivered' if ok else 'lost'}"


_HANDLERS: dict[str, Callable[[Simulation, list[str], dict], str]] = {
    "CURVE": _h_curve,
    "CONFIG": _h_config,
    "FORM": _h_form,
    "JOIN": _h_join,
    "PUBLISH": _h_publish,
    "QUERY": _h_query,
    "TRANSFER": _h_transfer,
    "GET": _h_transfer,
    "SEND": _h_send,
}
for _ev in _ROLE_EVENTS:
    _HANDLERS[_ev] = _make_leave(_ev)


def run_scenario(text: str, seed: int = 0, config: RegionConfig | None = None,
                 sim: Simulation | None = None) -> Simulation:
    """Run a scenario script; the returned simulation holds the trace and logs."""
    sim = sim or Simulation(seed, config)
    queue = parse_scenario(text)
    heapq.heapify(queue)
    while queue:
        line = heapq.heappop(queue)
        pos, kv = _split_kv(line.args)
        if sim.net is not None:
            sim.net.tick = line.tick
            sim.share.close_expired(line.tick)
        with metrics.metered() as meter:
            try:
                note = _HANDLERS[line.event](sim, pos, kv)
            except (RegionKeyError, ValueError) as exc:
                raise ScenarioParseError(line.lineno, f"{line.event}: {exc}") from exc
        c = meter.snapshot()
        rec = TraceRecord(
            line.tick, line.event, c.get("messages", 0), c.get("bytes", 0), c.get("scalar_mults", 0),
            sim.keys_stored(), c, note,
        )
        sim.trace.append(rec)
        sim.log.append(f"{line.tick} {line.event} {note}")
    return sim


def trace_csv(trace: list[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for rec in trace:
        w.writerow(rec.row())
    return buf.getvalue()


def run_scenario_file(path: str | Path, seed: int = 0, config: RegionConfig | None = None) -> Simulation:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(0, f"cannot read {path}: {exc.strerror}") from None
    return run_scenario(text, seed, config)
