"""Cost comparison against flat GDH and tree-based TGDH baselines.

All three schemes replay the same membership trace starting from members
``m1..mN`` and are metered the same way:

* ``messages`` counts deliveries: a unicast is 1, a multicast counts each
  receiving node.
* ``bytes`` is the measured wire size of each transmission at desk scale
  (31-bit group elements for the baselines, toy-curve points for the region).
* ``scalarOps`` counts exponentiations (baselines) or scalar multiplications
  (region) across every node.
* ``memoryBits`` is the mean number of stored keys per node times a nominal
  key size: 1024 bits for the discrete-log schemes, 160 for the EC scheme.
  It is a reporting model, not a measurement.

Baselines:

* GDH reruns the chained upflow for every event: the newcomer (if any)
  broadcasts a join request, members pass the growing token along the chain,
  and the last member broadcasts each member's partial key.  Every member
  keeps that broadcast, so it stores N+1 keys.
* TGDH keeps a binary key tree, inserts at the shallowest rightmost leaf and
  lets one sponsor refresh and broadcast the changed path.  A member stores
  its path secrets and co-path blinded keys.
"""

from __future__ import annotations

import csv
import io
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics
from .errors import ComparisonInvalidError
from .region import NodeProfile, RegionConfig, form_subgroups

# safe prime p = 2q + 1; 4 generates the order-q subgroup
DH_P = 2147483579
DH_Q = (DH_P - 1) // 2
DH_G = 4
DH_ELEMENT_BYTES = 4

KEY_BITS = {"GDH": 1024, "TGDH": 1024, "Region": 160}
CSV_HEADER = ("scheme", "N", "event", "messages", "bytes", "scalarOps", "memoryBits")

Event = tuple[str, str]


def _exp(b: int, e: int) -> int:
    metrics.record("scalar_mults")
    return pow(b, e, DH_P)


def _secret(rng: random.Random) -> int:
    return rng.randrange(1, DH_Q)


def _send(elements: int, recipients: int) -> None:
    # 8-byte header (kind, epoch, sender) plus the group elements
    if recipients:
        metrics.send(8 + elements * DH_ELEMENT_BYTES, recipients)


def initial_members(n: int) -> list[str]:
    return [f"m{i}" for i in range(1, n + 1)]


def make_trace(n: int, joins: int = 3, leaves: int = 3, rng: random.Random | None = None) -> list[Event]:
    """Alternating joins of fresh members and leaves of random existing ones."""
    rng = rng or random.Random(0)
    live = initial_members(n)
    trace: list[Event] = []
    j = 0
    for i in range(max(joins, leaves)):
        if i < joins:
            j += 1
            trace.append(("join", f"x{j}"))
            live.append(f"x{j}")
        if i < leaves:
            mid = live.pop(rng.randrange(len(live)))
            trace.append(("leave", mid))
    return trace


def read_trace(path: str | Path) -> list[Event]:
    """One event per line: ``join <id>`` or ``leave <id>``; ``#`` starts a comment."""
    trace = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("join", "leave"):
            raise ComparisonInvalidError(f"{path}:{lineno}: expected 'join <id>' or 'leave <id>'")
        trace.append((parts[0], parts[1]))
    return trace


def validate_trace(n: int, trace: list[Event]) -> None:
    if n < 2:
        raise ComparisonInvalidError("N must be at least 2")
    live = set(initial_members(n))
    for kind, mid in trace:
        if kind == "join":
            if mid in live:
                raise ComparisonInvalidError(f"join of existing member {mid}")
            live.add(mid)
        elif mid not in live:
            raise ComparisonInvalidError(f"leave of non-member {mid}")
        else:
            live.discard(mid)
            if len(live) < 2:
                raise ComparisonInvalidError("trace shrinks the group below two members")


@dataclass
class EventCost:
    event: str
    messages: int
    bytes: int
    scalar_ops: int
    keys_per_node: float


@dataclass
class SchemeCost:
    scheme: str
    n: int
    key_bits: int
    events: list[EventCost] = field(default_factory=list)
    members: frozenset[str] = frozenset()

    def mean(self, kind: str, attr: str = "messages") -> float:
        vals = [getattr(e, attr) for e in self.events if e.event.startswith(kind + ":")]
        return statistics.fmean(vals) if vals else 0.0

    def rows(self) -> list[tuple]:
        return [
            (self.scheme, self.n, e.event, e.messages, e.bytes, e.scalar_ops,
             round(e.keys_per_node * self.key_bits))
            for e in self.events
        ]


def _cost(event: str, meter: metrics.Meter, keys: float) -> EventCost:
    return EventCost(event, meter["deliveries"], meter["bytes"], meter["scalar_mults"], keys)


# ---------------------------------------------------------------- GDH

class GDHGroup:
    """Flat chained group DH; every event reruns the upflow with a fresh controller share."""

    def __init__(self, members: list[str], rng: random.Random) -> None:
        self.rng = rng
        self.members = list(members)
        self.secrets = {m: _secret(rng) for m in members}
        self.keys: dict[str, int] = {}
        self.rekey()

    def rekey(self) -> None:
        ms, s = self.members, self.secrets
        s[ms[-1]] = _secret(self.rng)
        partials: list[int] = []
        running = DH_G
        for i, mid in enumerate(ms[:-1]):
            partials = [_exp(P, s[mid]) for P in partials] + [running]
            running = _exp(running, s[mid])
            _send(len(partials) + 1, 1)
        ctrl = s[ms[-1]]
        partials = [_exp(P, ctrl) for P in partials]
        _send(len(partials), len(partials))
        self.keys = {ms[-1]: _exp(running, ctrl)}
        for mid, P in zip(ms[:-1], partials):
            self.keys[mid] = _exp(P, s[mid])

    def join(self, mid: str) -> None:
        _send(1, len(self.members))
        self.members.append(mid)
        self.secrets[mid] = _secret(self.rng)
        self.rekey()

    def leave(self, mid: str) -> None:
        self.members.remove(mid)
        del self.secrets[mid]
        self.rekey()

    def agreed(self) -> bool:
        return len(set(self.keys[m] for m in self.members)) == 1

    def keys_per_node(self) -> float:
        # own exponent, group key, and the retained broadcast of partial keys
        return float(len(self.members) + 1)


# ---------------------------------------------------------------- TGDH

@dataclass(eq=False)
class _TNode:
    left: "_TNode | None" = None
    right: "_TNode | None" = None
    member: str | None = None
    secret: int = 0
    bk: int = 0
    parent: "_TNode | None" = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.member is not None


def _tgdh_key(secret: int, other_bk: int) -> int:
    return _exp(other_bk, secret) % (DH_Q - 1) + 1


class TGDHGroup:
    def __init__(self, members: list[str], rng: random.Random) -> None:
        self.rng = rng
        self.root: _TNode | None = None
        self.leaves: dict[str, _TNode] = {}
        for mid in members:
            self._insert(mid)
        self._evaluate(self.root)

    def _evaluate(self, node: _TNode) -> None:
        if node.is_leaf:
            return
        self._evaluate(node.left)
        self._evaluate(node.right)
        node.secret = _tgdh_key(node.left.secret, node.right.bk)
        node.bk = _exp(DH_G, node.secret)

    def _shallowest(self) -> _TNode:
        """Rightmost leaf on the shallowest level that has one."""
        level = [self.root]
        while True:
            leaves = [n for n in level if n.is_leaf]
            if leaves:
                return leaves[-1]
            level = [c for n in level for c in (n.left, n.right)]

    def _insert(self, mid: str) -> _TNode:
        leaf = _TNode(member=mid, secret=_secret(self.rng))
        leaf.bk = _exp(DH_G, leaf.secret)
        self.leaves[mid] = leaf
        if self.root is None:
            self.root = leaf
            return leaf
        sponsor = self._shallowest()
        inner = _TNode(left=sponsor, right=leaf, parent=sponsor.parent)
        if sponsor.parent is None:
            self.root = inner
        elif sponsor.parent.left is sponsor:
            sponsor.parent.left = inner
        else:
            sponsor.parent.right = inner
        sponsor.parent = leaf.parent = inner
        return sponsor

    def _path(self, node: _TNode) -> list[_TNode]:
        out = []
        while node is not None:
            out.append(node)
            node = node.parent
        return out

    def _refresh_path(self, leaf: _TNode) -> list[_TNode]:
        """Recompute secrets and blinded keys from ``leaf`` to the root."""
        node = leaf
        changed = []
        while node.parent is not None:
            parent = node.parent
            sib = parent.right if parent.left is node else parent.left
            parent.secret = _tgdh_key(node.secret, sib.bk)
            parent.bk = _exp(DH_G, parent.secret)
            changed.append(parent)
            node = parent
        return changed

    def _others_update(self, changed: list[_TNode], skip: set[str]) -> None:
        # each other member recomputes the changed nodes on its own path
        changed_ids = set(map(id, changed))
        for mid, leaf in self.leaves.items():
            if mid in skip:
                continue
            for node in self._path(leaf)[1:]:
                if id(node) in changed_ids:
                    metrics.record("scalar_mults")

    def _sponsor_broadcast(self, sponsor: _TNode, skip: set[str]) -> None:
        sponsor.secret = _secret(self.rng)
        sponsor.bk = _exp(DH_G, sponsor.secret)
        changed = self._refresh_path(sponsor)
        _send(2 * len(changed) + 1, len(self.leaves) - 1)
        self._others_update(changed, skip | {sponsor.member})

    def join(self, mid: str) -> None:
        _send(1, len(self.leaves))
        sponsor = self._insert(mid)
        self._sponsor_broadcast(sponsor, {mid})
        # the newcomer computes its whole path
        for _ in self._path(self.leaves[mid])[1:]:
            metrics.record("scalar_mults")

    def leave(self, mid: str) -> None:
        leaf = self.leaves.pop(mid)
        parent = leaf.parent
        sib = parent.right if parent.left is leaf else parent.left
        grand = parent.parent
        sib.parent = grand
        if grand is None:
            self.root = sib
        elif grand.left is parent:
            grand.left = sib
        else:
            grand.right = sib
        sponsor = sib
        while not sponsor.is_leaf:
            sponsor = sponsor.right
        self._sponsor_broadcast(sponsor, set())

    def root_from(self, mid: str) -> int:
        """What ``mid`` computes from its own secret and co-path blinded keys."""
        node = self.leaves[mid]
        k = node.secret
        while node.parent is not None:
            parent = node.parent
            sib = parent.right if parent.left is node else parent.left
            k = pow(sib.bk, k, DH_P) % (DH_Q - 1) + 1
            node = parent
        return k

    def agreed(self) -> bool:
        return len({self.root_from(m) for m in self.leaves}) == 1 and self.root_from(
            next(iter(self.leaves))) == self.root.secret

    def depth(self, mid: str) -> int:
        return len(self._path(self.leaves[mid])) - 1

    def keys_per_node(self) -> float:
        # path secrets plus co-path blinded keys plus own leaf
        return statistics.fmean(2 * self.depth(m) + 1 for m in self.leaves)


def _run(scheme: str, group, n: int, trace: list[Event], check: bool) -> SchemeCost:
    cost = SchemeCost(scheme, n, KEY_BITS[scheme])
    for kind, mid in trace:
        with metrics.metered() as m:
            getattr(group, kind)(mid)
        if check and not group.agreed():
            raise AssertionError(f"{scheme}: members disagree after {kind} {mid}")
        cost.events.append(_cost(f"{kind}:{mid}", m, group.keys_per_node()))
    return cost


def run_baseline_gdh(n: int, trace: list[Event], seed: int = 0, check: bool = True) -> SchemeCost:
    validate_trace(n, trace)
    group = GDHGroup(initial_members(n), random.Random(seed))
    cost = _run("GDH", group, n, trace, check)
    cost.members = frozenset(group.members)
    return cost


def run_baseline_tgdh(n: int, trace: list[Event], seed: int = 0, check: bool = True) -> SchemeCost:
    validate_trace(n, trace)
    group = TGDHGroup(initial_members(n), random.Random(seed))
    cost = _run("TGDH", group, n, trace, check)
    cost.members = frozenset(group.leaves)
    return cost


class _RegionAdapter:
    def __init__(self, region) -> None:
        self.region = region

    def join(self, mid: str) -> None:
        self.region.join(NodeProfile(mid))

    def leave(self, mid: str) -> None:
        self.region.leave(mid)

    def agreed(self) -> bool:
        self.region.check_agreement()
        return True

    def keys_per_node(self) -> float:
        r = self.region
        return statistics.fmean(r.stored_keys(m) for m in r.members)


def region_for(n: int, subgroup_size: int, seed: int = 0, config: RegionConfig | None = None):
    config = config or RegionConfig(max_subgroup_size=subgroup_size)
    rng = random.Random(seed)
    # capabilities vary so that gateways are not simply the first joiner
    profiles = [NodeProfile(m, rng.randrange(8), rng.randrange(8), rng.randrange(8)) for m in initial_members(n)]
    return form_subgroups(profiles, config, rng)


def run_region(n: int, subgroup_size: int, trace: list[Event], seed: int = 0,
               check: bool = True, config: RegionConfig | None = None) -> SchemeCost:
    validate_trace(n, trace)
    adapter = _RegionAdapter(region_for(n, subgroup_size, seed, config))
    cost = _run("Region", adapter, n, trace, check)
    cost.members = frozenset(adapter.region.members)
    return cost


def storage_per_node(n: int, subgroup_size: int, seed: int = 0) -> dict[str, float]:
    """Mean keys stored per node right after the group forms."""
    with metrics.metered():
        return {
            "GDH": float(n + 1),
            "TGDH": TGDHGroup(initial_members(n), random.Random(seed)).keys_per_node(),
            "Region": _RegionAdapter(region_for(n, subgroup_size, seed)).keys_per_node(),
        }


@dataclass
class Comparison:
    n: int
    subgroup_size: int
    costs: dict[str, SchemeCost]

    def ordering(self, kind: str) -> bool:
        c = self.costs
        return c["Region"].mean(kind) < c["TGDH"].mean(kind) < c["GDH"].mean(kind)

    def rows(self) -> list[tuple]:
        rows = []
        for scheme in ("Region", "TGDH", "GDH"):
            cost = self.costs[scheme]
            rows += cost.rows()
            for kind in ("join", "leave"):
                rows.append((scheme, self.n, f"mean-{kind}", round(cost.mean(kind), 2),
                             round(cost.mean(kind, "bytes"), 2), round(cost.mean(kind, "scalar_ops"), 2),
                             round(statistics.fmean(e.keys_per_node for e in cost.events) * cost.key_bits)))
        for kind in ("join", "leave"):
            verdict = "PASS" if self.ordering(kind) else "FAIL"
            rows.append(("summary", self.n, f"messages-per-{kind} Region<TGDH<GDH {verdict}", "", "", "", ""))
        return rows


def compare(n: int, subgroup_size: int, trace: list[Event], seed: int = 0, check: bool = True) -> Comparison:
    """Run all three schemes on one trace; they must end with the same membership."""
    costs = {
        "Region": run_region(n, subgroup_size, trace, seed, check),
        "TGDH": run_baseline_tgdh(n, trace, seed, check),
        "GDH": run_baseline_gdh(n, trace, seed, check),
    }
    sets = {c.members for c in costs.values()}
    if len(sets) != 1 or any(len(c.events) != len(trace) for c in costs.values()):
        raise ComparisonInvalidError("schemes diverged on the same trace")
    return Comparison(n, subgroup_size, costs)


def storage_rows(n: int, subgroup_size: int, seed: int = 0) -> list[tuple]:
    keys = storage_per_node(n, subgroup_size, seed)
    rows = [(s, n, "storage", "", "", "", round(k * KEY_BITS[s])) for s, k in keys.items()]
    ok = keys["Region"] <= keys["TGDH"] < keys["GDH"]
    rows.append(("summary", n, f"keys-per-node Region<=TGDH<GDH {'PASS' if ok else 'FAIL'}", "", "", "", ""))
    return rows


def to_csv(rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()
