"""Publish, search and transfer shared items over the encrypted channels.

A query is multicast in the origin's subgroup under the regional key.  For a
global query the origin's gateway forwards it to every other gateway under
the outer group key, and each of those multicasts it in its own subgroup.
Peers with a match answer by multicasting a response in their subgroup; the
response then retraces the gateway path back to the origin.  Peers without
a match stay silent.  Transfers use the same routes.

Application messages are JSON; they only ever travel as ciphertext.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING

from .errors import ItemNotFoundError, KeyNotReadyError, UndeliverableError

if TYPE_CHECKING:
    from .simnet import Network

NAME, CONTENT = "name", "content"
DEFAULT_HORIZON = 10


@dataclass(frozen=True)
class SharedItem:
    name: str
    content: bytes
    owner: str
    path: str

    def metadata(self) -> dict:
        return {"name": self.name, "size": len(self.content), "owner": self.owner, "path": self.path}


@dataclass(frozen=True)
class QueryMessage:
    query_id: str
    kind: str
    needle: str
    origin: str
    origin_gateway: str
    substring: bool = False


@dataclass(frozen=True)
class QueryResponse:
    query_id: str
    responder: str
    matches: list[dict] = field(default_factory=list)


@dataclass(frozen=True)
class TransferRequest:
    item_name: str
    requester: str


@dataclass(frozen=True)
class TransferData:
    item_name: str
    content: bytes | None

    @property
    def found(self) -> bool:
        return self.content is not None


_TYPES = {c.__name__: c for c in (QueryMessage, QueryResponse, TransferRequest, TransferData)}


def encode(msg) -> bytes:
    d = asdict(msg)
    if isinstance(msg, TransferData) and msg.content is not None:
        d["content"] = base64.b64encode(msg.content).decode()
    return json.dumps({"type": type(msg).__name__, **d}, sort_keys=True, separators=(",", ":")).encode()


def decode(data: bytes):
    d = json.loads(data)
    cls = _TYPES[d.pop("type")]
    if cls is TransferData and d["content"] is not None:
        d["content"] = base64.b64decode(d["content"])
    return cls(**d)


def search_local(index: dict[str, SharedItem], kind: str, needle: str, substring: bool = False) -> list[dict]:
    """Name search is exact and case-insensitive (or substring); content search
    matches a byte substring."""
    if kind == NAME:
        n = needle.casefold()
        hit = (lambda it: n in it.name.casefold()) if substring else (lambda it: it.name.casefold() == n)
    elif kind == CONTENT:
        raw = needle.encode()
        hit = lambda it: raw in it.content
    else:
        raise ValueError(f"unknown search kind {kind!r}")
    return [it.metadata() for it in index.values() if hit(it)]


@dataclass
class OpenQuery:
    message: QueryMessage
    opened: int
    responses: list[QueryResponse] = field(default_factory=list)


class ShareLayer:
    def __init__(self, net: "Network", horizon: int = DEFAULT_HORIZON) -> None:
        self.net = net
        self.horizon = horizon
        self.indexes: dict[str, dict[str, SharedItem]] = {}
        self.open: dict[str, OpenQuery] = {}
        self.closed: dict[str, OpenQuery] = {}
        self._seq: dict[str, int] = {}

    @property
    def region(self):
        return self.net.region

    def publish(self, owner: str, name: str, content: bytes, path: str | None = None) -> SharedItem:
        item = SharedItem(name, bytes(content), owner, path or f"/{owner}/shared/{name}")
        self.indexes.setdefault(owner, {})[name] = item
        return item

    def unpublish(self, owner: str, name: str) -> None:
        self.indexes.get(owner, {}).pop(name, None)

    def forget(self, member: str) -> None:
        self.indexes.pop(member, None)

    def close_expired(self, tick: int) -> None:
        for qid in [q for q, oq in self.open.items() if tick - oq.opened >= self.horizon]:
            self.closed[qid] = self.open.pop(qid)

    # ------------------------------------------------------------ query

    def _search(self, peer: str, q: QueryMessage) -> QueryResponse | None:
        matches = search_local(self.indexes.get(peer, {}), q.kind, q.needle, q.substring)
        return QueryResponse(q.query_id, peer, matches) if matches else None

    def query(self, origin: str, kind: str, needle: str, scope: str = "global",
              substring: bool = False) -> list[QueryResponse]:
        """Ask every reachable peer; returns the responses that reached ``origin``."""
        if scope not in ("local", "global"):
            raise ValueError(f"scope must be local or global, not {scope!r}")
        r = self.region
        if r.kr_views.get(origin) is None:
            raise KeyNotReadyError(f"{origin} holds no regional key")
        n = self._seq.get(origin, 0) + 1
        self._seq[origin] = n
        home = r.subgroup_of(origin)
        q = QueryMessage(f"{origin}#{n}", kind, needle, origin, home.gateway, substring)
        oq = OpenQuery(q, self.net.tick)
        self.open[q.query_id] = oq
        data = encode(q)

        answered: list[QueryResponse] = []
        heard = self.net.multicast_region(origin, data, "query")
        for peer, got in heard.items():
            resp = self._search(peer, decode(got))
            if resp is not None:
                answered.append(resp)
        for resp in answered:
            self._respond_home(oq, resp)

        if scope == "global" and r.outer is not None and len(r.outer) > 1:
            gw = home.gateway
            if gw == origin or gw in heard:
                for remote_gw, got in self.net.kg_multicast(gw, data, "query").items():
                    self._remote_subgroup(oq, remote_gw, got)
        return oq.responses

    def _deliver(self, oq: OpenQuery, data: bytes | None) -> None:
        if data is not None:
            oq.responses.append(decode(data))

    def _respond_home(self, oq: OpenQuery, resp: QueryResponse) -> None:
        # responder and origin share a subgroup: one multicast reaches the origin
        got = self.net.multicast_region(resp.responder, encode(resp), "response")
        self._deliver(oq, got.get(oq.message.origin))

    def _remote_subgroup(self, oq: OpenQuery, gw: str, data: bytes) -> None:
        q = decode(data)
        responses = []
        own = self._search(gw, q)
        if own is not None:
            responses.append(own)
        for peer, got in self.net.multicast_region(gw, data, "query").items():
            resp = self._search(peer, decode(got))
            if resp is not None:
                responses.append(resp)
        for resp in responses:
            self._respond_remote(oq, gw, resp)

    def _respond_remote(self, oq: OpenQuery, gw: str, resp: QueryResponse) -> None:
        q = oq.message
        data: bytes | None = encode(resp)
        if resp.responder != gw:
            data = self.net.multicast_region(resp.responder, data, "response").get(gw)
        if data is None:
            return
        data = self.net.kg_unicast(gw, q.origin_gateway, data, "response")
        if data is None or q.origin == q.origin_gateway:
            self._deliver(oq, data)
            return
        if q.origin_gateway not in self.region:
            raise UndeliverableError(f"origin gateway {q.origin_gateway} left before the response")
        got = self.net.multicast_region(q.origin_gateway, data, "response")
        self._deliver(oq, got.get(q.origin))

    # ------------------------------------------------------------ transfer

    def transfer(self, origin: str, responder: str, name: str) -> bytes:
        """Request ``name`` from ``responder``; returns the delivered content."""
        r = self.region
        if responder not in r:
            raise UndeliverableError(f"{responder} is not in the region")
        req = self.net.send(origin, responder, encode(TransferRequest(name, origin)), "transfer-request")
        if req is None:
            raise UndeliverableError(f"transfer request to {responder} was lost")
        item = self.indexes.get(responder, {}).get(decode(req).item_name)
        reply = TransferData(name, item.content if item else None)
        got = self.net.send(responder, origin, encode(reply), "transfer-data")
        if got is None:
            raise UndeliverableError(f"transfer data from {responder} was lost")
        data = decode(got)
        if not data.found:
            raise ItemNotFoundError(f"{responder} has no item {name!r}")
        return data.content
