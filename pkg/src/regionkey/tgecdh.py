"""Tree-based outer-group key agreement among gateways.

Members sit at the leaves of a binary key tree.  Node ``<l, v>`` has children
``<l+1, 2v>`` and ``<l+1, 2v+1>``; an internal node's secret is the
x-coordinate of (one child's secret) times (the other child's blinded key),
reduced mod n, and every node's blinded key is its secret times G.  A member
holds the secrets on its own leaf-to-root path and needs only the blinded
keys of the siblings along that path (its co-path) to reach the root.

The group controller is the most recent joiner.  After each membership
change it (and, when part of the tree it cannot reach went stale, a sponsor)
recomputes a path and broadcasts the whole tree of blinded keys.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterator, Mapping, NamedTuple

from . import metrics
from .ec import CurveParams, Point, scalar_mult
from .errors import (
    CurveError,
    DegenerateKeyError,
    DuplicateMemberError,
    GroupDissolvedError,
    IncompleteBroadcastError,
    NoSuchMemberError,
    RoleError,
    StaleEpochError,
)
from .gecdh import Member
from .wire import Reader, WireError, Writer

Path = tuple[int, ...]


class NodeIndex(NamedTuple):
    l: int
    v: int

    def children(self) -> tuple["NodeIndex", "NodeIndex"]:
        return NodeIndex(self.l + 1, 2 * self.v), NodeIndex(self.l + 1, 2 * self.v + 1)

    @classmethod
    def of(cls, path: Path) -> "NodeIndex":
        v = 0
        for bit in path:
            v = 2 * v + bit
        return cls(len(path), v)


@dataclass(frozen=True)
class Node:
    """A key-tree node; leaves carry ``member``, internal nodes two children."""

    left: "Node | None" = None
    right: "Node | None" = None
    member: str | None = None
    blinded: Point | None = None

    @property
    def is_leaf(self) -> bool:
        return self.member is not None

    def child(self, bit: int) -> "Node":
        return self.left if bit == 0 else self.right


def leaf(member: str, blinded: Point | None = None) -> Node:
    return Node(member=member, blinded=blinded)


def walk(node: Node, path: Path = ()) -> Iterator[tuple[Path, Node]]:
    """Preorder traversal yielding ``(path, node)``."""
    yield path, node
    if not node.is_leaf:
        yield from walk(node.left, path + (0,))
        yield from walk(node.right, path + (1,))


def leaf_paths(node: Node) -> dict[str, Path]:
    return {n.member: p for p, n in walk(node) if n.is_leaf}


def get(node: Node, path: Path) -> Node:
    for bit in path:
        node = node.child(bit)
    return node


def put(node: Node, path: Path, new: Node) -> Node:
    if not path:
        return new
    if path[0] == 0:
        return replace(node, left=put(node.left, path[1:], new), blinded=node.blinded)
    return replace(node, right=put(node.right, path[1:], new), blinded=node.blinded)


def blinded_keys(node: Node) -> dict[NodeIndex, Point]:
    return {NodeIndex.of(p): n.blinded for p, n in walk(node) if n.blinded is not None}


def node_key(left_secret: int, right_blinded: Point, curve: CurveParams) -> int:
    """Parent secret from one child's secret and the other child's blinded key."""
    P = scalar_mult(left_secret, right_blinded, curve)
    if P.is_infinity or P.x % curve.n == 0:
        raise DegenerateKeyError(f"node key degenerates ({P}); refresh a contribution")
    return P.x % curve.n


def compute_path(tree: Node, path: Path, secret: int, curve: CurveParams) -> tuple[Node, int]:
    """Install ``secret`` at the leaf under ``path`` and refresh every key above it.

    Returns the updated tree (new blinded keys along the path) and the root
    secret.  Needs the blinded key of every sibling on the path.
    """
    chain = [tree]
    for bit in path:
        chain.append(chain[-1].child(bit))
    K = secret
    new = replace(chain[-1], blinded=scalar_mult(K, curve.G, curve))
    for depth in range(len(path) - 1, -1, -1):
        parent, bit = chain[depth], path[depth]
        sibling = parent.child(1 - bit)
        if sibling.blinded is None:
            raise IncompleteBroadcastError(f"no blinded key at {NodeIndex.of(path[:depth] + (1 - bit,))}")
        K = node_key(K, sibling.blinded, curve)
        kids = {"left": new} if bit == 0 else {"right": new}
        new = replace(parent, blinded=scalar_mult(K, curve.G, curve), **kids)
    return new, K


class Kind(IntEnum):
    JOIN = 1
    LEAVE = 2
    CONTROLLER_LEAVE = 3
    HANDOVER = 4
    SPONSOR = 5


@dataclass(frozen=True)
class TreeBroadcast:
    """The full tree shape with every blinded key, as sent after a rekey."""

    kind: Kind
    epoch: int
    curve: CurveParams
    sender: str
    tree: Node

    def to_bytes(self) -> bytes:
        w = Writer().u8(self.kind).u32(self.epoch).str(self.curve.name).str(self.sender)
        write_tree(w, self.tree, self.curve)
        return w.frame()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TreeBroadcast":
        r = Reader(data, framed=True)
        kind, epoch, curve, sender = Kind(r.u8()), r.u32(), r.curve(), r.str()
        tree = read_tree(r, curve)
        r.done()
        return cls(kind, epoch, curve, sender, tree)


_LEAF, _HAS_BK = 0x01, 0x02


def write_tree(w: Writer, tree: Node, curve: CurveParams) -> None:
    """Preorder: ``l`` (u16), ``v`` (varint), flags, [blinded point], [leaf member id]."""
    for path, node in walk(tree):
        idx = NodeIndex.of(path)
        flags = (_LEAF if node.is_leaf else 0) | (_HAS_BK if node.blinded is not None else 0)
        w.u16(idx.l).varint(idx.v).u8(flags)
        if node.blinded is not None:
            w.point(node.blinded, curve)
        if node.is_leaf:
            w.str(node.member)


def read_tree(r: Reader, curve: CurveParams, expect: NodeIndex = NodeIndex(0, 0)) -> Node:
    l, v, flags = r.u16(), r.varint(), r.u8()
    if (l, v) != expect:
        raise WireError(f"tree node {(l, v)} where {tuple(expect)} was expected")
    blinded = r.point(curve) if flags & _HAS_BK else None
    if flags & _LEAF:
        return Node(member=r.str(), blinded=blinded)
    left_idx, right_idx = expect.children()
    left = read_tree(r, curve, left_idx)
    right = read_tree(r, curve, right_idx)
    return Node(left, right, blinded=blinded)


@dataclass(frozen=True)
class OuterGroupState:
    """Controller-side view of the outer group.

    ``join_order`` lists current members by join time; the controller is the
    last entry.  ``root_key`` is the group secret (the root node's key) and
    ``tree.blinded`` the corresponding public point.
    """

    curve: CurveParams
    tree: Node
    join_order: tuple[str, ...]
    root_key: int
    epoch: int = 0
    policy: str = "root"

    @property
    def controller_id(self) -> str:
        return self.join_order[-1]

    @property
    def root_point(self) -> Point:
        return self.tree.blinded

    def __len__(self) -> int:
        return len(self.join_order)

    def __contains__(self, member_id: object) -> bool:
        return member_id in self.join_order

    def depth_of(self, member_id: str) -> int:
        return len(leaf_paths(self.tree)[member_id])


POLICIES = ("root", "shallowest")


def create(member: Member, policy: str = "root") -> OuterGroupState:
    if policy not in POLICIES:
        raise ValueError(f"unknown insertion policy {policy!r}")
    tree = leaf(member.member_id, member.public)
    return OuterGroupState(member.curve, tree, (member.member_id,), member.scalar, 0, policy)


def _insert(tree: Node, new: Node, policy: str) -> tuple[Node, Path]:
    if policy == "root":
        return Node(tree, new), (1,)
    # shallowest leaf, rightmost among equals, is split into (old, new)
    path, target = min(
        ((p, n) for p, n in walk(tree) if n.is_leaf),
        key=lambda pn: (len(pn[0]), -NodeIndex.of(pn[0]).v),
    )
    return put(tree, path, Node(target, new)), path + (1,)


def _broadcast(kind: Kind, epoch: int, curve: CurveParams, sender: str, tree: Node, recipients: int) -> TreeBroadcast:
    bc = TreeBroadcast(kind, epoch, curve, sender, tree)
    if recipients:
        metrics.send(len(bc.to_bytes()), recipients=recipients)
    return bc


def join_gateway(
    state: OuterGroupState,
    newcomer: Member,
    fresh_old_controller_scalar: int | None = None,
) -> tuple[OuterGroupState, TreeBroadcast]:
    """Admit ``newcomer`` as the new controller.

    The outgoing controller first installs ``fresh_old_controller_scalar``
    (when given) on its leaf, then hands the tree to the newcomer, who is
    inserted per the state's policy and computes the new root.
    """
    curve = state.curve
    if newcomer.curve != curve:
        raise CurveError("newcomer uses a different curve")
    if newcomer.member_id in state:
        raise DuplicateMemberError(newcomer.member_id)
    metrics.send(len(Writer().u8(Kind.JOIN).str(newcomer.member_id).frame()))

    tree = state.tree
    old = state.controller_id
    if fresh_old_controller_scalar is not None:
        fresh = fresh_old_controller_scalar % curve.n
        tree, _ = compute_path(tree, leaf_paths(tree)[old], fresh, curve)
    handover = TreeBroadcast(Kind.HANDOVER, state.epoch, curve, old, tree)
    metrics.send(len(handover.to_bytes()))

    tree, path = _insert(tree, leaf(newcomer.member_id), state.policy)
    tree, root = compute_path(tree, path, newcomer.scalar, curve)
    epoch = state.epoch + 1
    new_state = replace(state, tree=tree, join_order=state.join_order + (newcomer.member_id,),
                        root_key=root, epoch=epoch)
    return new_state, _broadcast(Kind.JOIN, epoch, curve, newcomer.member_id, tree, len(new_state) - 1)


def _remove(
    state: OuterGroupState,
    leaver: str,
    controller: str,
    fresh_scalar: int,
    scalars: Mapping[str, int] | None,
    kind: Kind,
) -> tuple[OuterGroupState, TreeBroadcast]:
    curve = state.curve
    fresh = fresh_scalar % curve.n
    if fresh == 0:
        raise ValueError("fresh scalar is 0 mod n")
    paths = leaf_paths(state.tree)
    lp = paths[leaver]
    parent_path = lp[:-1]
    sibling = get(state.tree, parent_path).child(1 - lp[-1])
    tree = put(state.tree, parent_path, sibling)
    join_order = tuple(m for m in state.join_order if m != leaver)
    epoch = state.epoch + 1
    others = len(join_order) - 1

    paths = leaf_paths(tree)
    sponsor = find_sponsor(state, leaver, controller)
    if sponsor is not None:
        if scalars is None or sponsor not in scalars:
            raise RoleError(f"sponsor {sponsor} must recompute its path but its scalar was not supplied")
        tree, _ = compute_path(tree, paths[sponsor], scalars[sponsor] % curve.n, curve)
        _broadcast(Kind.SPONSOR, epoch, curve, sponsor, tree, others)

    tree, root = compute_path(tree, paths[controller], fresh, curve)
    new_state = replace(state, tree=tree, join_order=join_order, root_key=root, epoch=epoch)
    return new_state, _broadcast(kind, epoch, curve, controller, tree, others)


def find_sponsor(state: OuterGroupState, leaver: str, controller: str) -> str | None:
    """Member that must refresh keys the controller's path will not reach.

    Removing a leaf promotes its sibling subtree into the parent's slot, so
    every key above that slot depended on the vanished leaf.  If all of them
    lie on the controller's path nobody else needs to act; otherwise the
    newest member of the promoted subtree recomputes its own path first.
    """
    lp = leaf_paths(state.tree)[leaver]
    slot = lp[:-1]
    if not slot:
        return None
    sibling = get(state.tree, slot).child(1 - lp[-1])
    promoted = {n.member for _, n in walk(sibling) if n.is_leaf}
    if controller in promoted:
        return None
    # the controller's path after removal, expressed in pre-removal coordinates
    cp = leaf_paths(state.tree)[controller]
    if cp[:len(slot) - 1] == slot[:-1] and len(cp) >= len(slot):
        return None
    return next(m for m in reversed(state.join_order) if m in promoted)


def leave_gateway(
    state: OuterGroupState,
    leaver_id: str,
    fresh_controller_scalar: int,
    scalars: Mapping[str, int] | None = None,
) -> tuple[OuterGroupState, TreeBroadcast]:
    """Remove a non-controller member; its sibling subtree takes the parent's place.

    ``scalars`` is consulted only when a sponsor outside the controller's
    path must recompute (see module docstring).
    """
    if leaver_id not in state:
        raise NoSuchMemberError(leaver_id)
    if leaver_id == state.controller_id:
        raise RoleError(f"{leaver_id} is the outer controller; use leave_controller")
    metrics.send(len(Writer().u8(Kind.LEAVE).str(leaver_id).frame()))
    return _remove(state, leaver_id, state.controller_id, fresh_controller_scalar, scalars, Kind.LEAVE)


def leave_controller(
    state: OuterGroupState,
    fresh_scalar: int,
    scalars: Mapping[str, int] | None = None,
) -> tuple[OuterGroupState, TreeBroadcast]:
    """Remove the controller; the previous joiner takes over and refreshes."""
    if len(state) < 2:
        raise GroupDissolvedError(f"outer group of {state.controller_id} is now empty")
    leaver = state.controller_id
    successor = state.join_order[-2]
    metrics.send(len(Writer().u8(Kind.CONTROLLER_LEAVE).str(leaver).frame()))
    return _remove(state, leaver, successor, fresh_scalar, scalars, Kind.CONTROLLER_LEAVE)


def recompute_root(member: Member, broadcast: TreeBroadcast) -> int:
    """Fold the member's scalar up its co-path to the root secret."""
    tree = broadcast.tree
    try:
        path = leaf_paths(tree)[member.member_id]
    except KeyError:
        raise NoSuchMemberError(f"{member.member_id} has no leaf in the broadcast tree") from None
    chain = [tree]
    for bit in path:
        chain.append(chain[-1].child(bit))
    K = member.scalar
    for depth in range(len(path) - 1, -1, -1):
        sibling = chain[depth].child(1 - path[depth])
        if sibling.blinded is None:
            raise IncompleteBroadcastError(
                f"missing blinded key at {NodeIndex.of(path[:depth] + (1 - path[depth],))}"
            )
        K = node_key(K, sibling.blinded, member.curve)
    return K


@dataclass(frozen=True)
class OuterView:
    epoch: int
    key: int


def accept(view: OuterView | None, member: Member, broadcast: TreeBroadcast) -> OuterView:
    if view is not None and broadcast.epoch <= view.epoch:
        raise StaleEpochError(f"epoch {broadcast.epoch} <= accepted epoch {view.epoch}")
    return OuterView(broadcast.epoch, recompute_root(member, broadcast))


def stored_keys(state: OuterGroupState, member_id: str) -> int:
    """Key material a member keeps: its path secrets plus its co-path blinded keys."""
    depth = state.depth_of(member_id)
    return 2 * depth + 1
