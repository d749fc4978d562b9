import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from regionkey import tgecdh
from regionkey.ec import E751, TOY_31, Point, scalar_mult
from regionkey.errors import (
    DegenerateKeyError, DuplicateMemberError, GroupDissolvedError, IncompleteBroadcastError,
    NoSuchMemberError, RoleError, StaleEpochError,
)
from regionkey.gecdh import Member
from regionkey.tgecdh import Node, NodeIndex, leaf, leaf_paths

C = E751


def evaluate(node, scalars, curve):
    """Oracle: every node secret computed bottom-up from all leaf scalars."""
    if node.is_leaf:
        return scalars[node.member] % curve.n
    left = evaluate(node.left, scalars, curve)
    right = evaluate(node.right, scalars, curve)
    return scalar_mult(left * right, curve.G, curve).x % curve.n


def check_blinded(node, scalars, curve):
    assert node.blinded == scalar_mult(evaluate(node, scalars, curve), curve.G, curve)
    if not node.is_leaf:
        check_blinded(node.left, scalars, curve)
        check_blinded(node.right, scalars, curve)


def build(policy="root"):
    s = tgecdh.create(Member("M1", 1772, C), policy)
    s, _ = tgecdh.join_gateway(s, Member("M2", 1949, C))
    return s


def test_two_member_root():
    s = build()
    assert s.root_point == Point(540, 111)
    assert s.controller_id == "M2"
    assert s.tree.left.blinded == Point(290, 638)
    assert s.tree.right.blinded == Point(504, 163)


def test_third_join_root_insertion():
    s, bc = tgecdh.join_gateway(build(), Member("M3", 14755, C), 2835)
    assert s.root_point == Point(664, 736)
    assert leaf_paths(s.tree) == {"M1": (0, 0), "M2": (0, 1), "M3": (1,)}
    for mid, k in (("M1", 1772), ("M2", 2835)):
        assert tgecdh.recompute_root(Member(mid, k, C), bc) == s.root_key


def test_third_join_shallowest_insertion_differs():
    s, _ = tgecdh.join_gateway(build("shallowest"), Member("M3", 14755, C), 2835)
    assert s.root_point == Point(43, 56)
    assert leaf_paths(s.tree) == {"M1": (0,), "M2": (1, 0), "M3": (1, 1)}


def test_fourth_member_leave_and_controller_leave():
    s, _ = tgecdh.join_gateway(build(), Member("M3", 14755, C), 2835)
    s, _ = tgecdh.join_gateway(s, Member("M4", 48569, C), 8751)
    scalars = {"M1": 1772, "M2": 2835, "M3": 8751, "M4": 48569}
    left, _ = tgecdh.leave_gateway(s, "M3", 98418, scalars)
    assert left.root_point == Point(428, 686)
    gone, _ = tgecdh.leave_controller(s, 19478, scalars)
    assert gone.root_point == Point(681, 475)
    assert gone.controller_id == "M3"


def test_node_index_arithmetic():
    assert NodeIndex(0, 0).children() == (NodeIndex(1, 0), NodeIndex(1, 1))
    assert NodeIndex(2, 3).children() == (NodeIndex(3, 6), NodeIndex(3, 7))
    assert NodeIndex.of((1, 0, 1)) == NodeIndex(3, 5)


def test_degenerate_node_key():
    # x(1 * G) = 0 on this curve, which would give a zero secret
    with pytest.raises(DegenerateKeyError):
        tgecdh.node_key(1, C.G, C)


def test_incomplete_broadcast():
    tree = Node(leaf("a"), leaf("b"))
    with pytest.raises(IncompleteBroadcastError):
        tgecdh.compute_path(tree, (0,), 5, C)


def test_errors():
    s = build()
    with pytest.raises(DuplicateMemberError):
        tgecdh.join_gateway(s, Member("M1", 3, C))
    with pytest.raises(RoleError):
        tgecdh.leave_gateway(s, "M2", 5)
    with pytest.raises(NoSuchMemberError):
        tgecdh.leave_gateway(s, "Z", 5)
    with pytest.raises(GroupDissolvedError):
        tgecdh.leave_controller(tgecdh.create(Member("M1", 3, C)), 5)
    with pytest.raises(ValueError):
        tgecdh.create(Member("M1", 3, C), "leftmost")


def test_broadcast_round_trip_and_stale_epoch():
    s, bc = tgecdh.join_gateway(build(), Member("M3", 14755, C), 2835)
    again = tgecdh.TreeBroadcast.from_bytes(bc.to_bytes())
    assert again == bc
    view = tgecdh.accept(None, Member("M1", 1772, C), bc)
    with pytest.raises(StaleEpochError):
        tgecdh.accept(view, Member("M1", 1772, C), bc)


def _grow(n, policy, rng, curve=TOY_31):
    scalars = {"g0": rng.randrange(1, curve.n)}
    s = tgecdh.create(Member("g0", scalars["g0"], curve), policy)
    for i in range(1, n):
        fresh = rng.randrange(1, curve.n)
        scalars[s.controller_id] = fresh
        scalars[f"g{i}"] = rng.randrange(1, curve.n)
        s, _ = tgecdh.join_gateway(s, Member(f"g{i}", scalars[f"g{i}"], curve), fresh)
    return s, scalars


def test_sponsor_needed_when_controller_path_misses_stale_keys():
    # shallowest tree of 4: ((g0,g2),(g1,g3)); g3 controls, g0 leaves -> g2 promoted,
    # the root is on g3's path so no sponsor
    s, scalars = _grow(4, "shallowest", random.Random(3))
    assert tgecdh.find_sponsor(s, "g0", "g3") is None
    # 7 members: g1 sits under g5's branch, away from controller g6
    s, scalars = _grow(7, "shallowest", random.Random(3))
    assert leaf_paths(s.tree)["g1"] == (1, 0, 0) and s.controller_id == "g6"
    assert tgecdh.find_sponsor(s, "g1", "g6") == "g5"
    assert tgecdh.find_sponsor(s, "g3", "g6") is None
    far = ["g1"]
    with pytest.raises(RoleError):
        tgecdh.leave_gateway(s, far[0], 5)


@pytest.mark.parametrize("n", [2, 3, 5, 8, 13])
def test_shallowest_policy_keeps_tree_balanced(n):
    s, _ = _grow(n, "shallowest", random.Random(n))
    assert max(len(p) for p in leaf_paths(s.tree).values()) == math.ceil(math.log2(n))
    assert all(tgecdh.stored_keys(s, m) == 2 * s.depth_of(m) + 1 for m in s.join_order)


@settings(max_examples=25)
@given(st.sampled_from(["root", "shallowest"]), st.integers(0, 2**32),
       st.lists(st.sampled_from(["join", "leave", "ctrl"]), min_size=1, max_size=10))
def test_random_sequences_match_bottom_up_oracle(policy, seed, ops):
    rng = random.Random(seed)
    curve = TOY_31
    s, scalars = _grow(2, policy, rng)
    views = {}
    for i, op in enumerate(ops):
        fresh = rng.randrange(1, curve.n)
        if op == "join" or len(s) == 2:
            mid = f"n{i}"
            scalars[mid] = rng.randrange(1, curve.n)
            scalars[s.controller_id] = fresh
            s, bc = tgecdh.join_gateway(s, Member(mid, scalars[mid], curve), fresh)
        elif op == "leave":
            victim = rng.choice(s.join_order[:-1])
            s, bc = tgecdh.leave_gateway(s, victim, fresh, scalars)
            del scalars[victim]
            views.pop(victim, None)
            scalars[s.controller_id] = fresh
        else:
            old = s.controller_id
            s, bc = tgecdh.leave_controller(s, fresh, scalars)
            del scalars[old]
            views.pop(old, None)
            scalars[s.controller_id] = fresh
        assert s.root_key == evaluate(s.tree, scalars, curve)
        check_blinded(s.tree, scalars, curve)
        for m in s.join_order[:-1]:
            views[m] = tgecdh.accept(views.get(m), Member(m, scalars[m], curve), bc)
            assert views[m].key == s.root_key
