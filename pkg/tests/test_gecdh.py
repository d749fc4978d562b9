import random
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from regionkey import gecdh, metrics
from regionkey.ec import E211, TOY_31, Point, scalar_mult
from regionkey.errors import (
    DuplicateMemberError, GroupDissolvedError, NoSuchMemberError, NotAddressedError,
    RoleError, StaleEpochError,
)
from regionkey.gecdh import Member

C = E211
A, B, CC = Member("A", 47568, C), Member("B", 13525, C), Member("C", 82910, C)


def product_key(scalars, curve):
    """Oracle: (prod n_i) * G computed directly."""
    e = reduce(lambda x, y: x * y % curve.n, scalars, 1)
    return scalar_mult(e, curve.G, curve)


def check_invariant(state, scalars):
    assert state.regional_key == product_key([scalars[m] for m in state.members], state.curve)
    for m in state.members:
        assert scalar_mult(scalars[m], state.sub_products[m], state.curve) == state.regional_key


def test_member_scalar_reduced_and_nonzero():
    assert Member("x", 241 + 5, C).scalar == 5
    with pytest.raises(ValueError):
        Member("x", 241, C)
    assert A.public == Point(206, 121)


def test_pair_key():
    st_ = gecdh.init_pair(A, B)
    assert st_.regional_key == Point(155, 115)
    assert st_.controller_id == "B"
    assert st_.epoch == 1


def test_join_of_c():
    st_, bc = gecdh.join(gecdh.init_pair(A, B), CC)
    assert st_.regional_key == Point(120, 31)
    assert bc.partials == {"A": Point(131, 84), "B": Point(147, 97)}
    assert gecdh.recompute_key(A, bc) == gecdh.recompute_key(B, bc) == Point(120, 31)
    assert st_.controller_id == "C"


def test_controller_leave_after_d_joins():
    four, _ = gecdh.join(gecdh.join(gecdh.init_pair(A, B), CC)[0], Member("D", 99, C))
    scalars = {"A": 47568, "B": 13525, "C": 82910, "D": 99}
    st_, bc = gecdh.controller_leave(four, 52898, scalars)
    assert st_.regional_key == Point(198, 139)
    assert bc.partials == {"A": Point(16, 111), "B": Point(181, 2)}
    assert st_.controller_id == "C"


def test_join_with_refresh_replaces_controller_share():
    pair = gecdh.init_pair(A, B)
    st_, bc = gecdh.join(pair, CC, controller=B, fresh_scalar=1234)
    check_invariant(st_, {"A": 47568, "B": 1234, "C": 82910})
    with pytest.raises(RoleError):
        gecdh.join(pair, CC, controller=A, fresh_scalar=5)


def test_leave_excludes_leaver_and_broadcast_skips_it():
    rng = random.Random(1)
    scalars = {f"m{i}": rng.randrange(1, TOY_31.n) for i in range(5)}
    st_ = gecdh.singleton(Member("m0", scalars["m0"], TOY_31))
    for i in range(1, 5):
        st_, _ = gecdh.join(st_, Member(f"m{i}", scalars[f"m{i}"], TOY_31))
    new, bc = gecdh.member_leave(st_, "m2", 777, scalars)
    scalars["m4"] = 777
    del scalars["m2"]
    check_invariant(new, scalars)
    with pytest.raises(NotAddressedError):
        gecdh.recompute_key(Member("m2", 5, TOY_31), bc)


def test_leave_upflow_message_count():
    scalars = {f"m{i}": i + 2 for i in range(6)}
    st_ = gecdh.singleton(Member("m0", 2, C))
    for i in range(1, 6):
        st_, _ = gecdh.join(st_, Member(f"m{i}", i + 2, C))
    with metrics.metered() as m:
        gecdh.member_leave(st_, "m1", 5, scalars)
    # notice + (remaining - 1) upflow tokens + one broadcast to remaining - 1
    assert m["messages"] == 1 + 4 + 1
    assert m["deliveries"] == 1 + 4 + 4


def test_errors():
    pair = gecdh.init_pair(A, B)
    with pytest.raises(DuplicateMemberError):
        gecdh.join(pair, A)
    with pytest.raises(NoSuchMemberError):
        gecdh.member_leave(pair, "Z", 3, {})
    with pytest.raises(RoleError):
        gecdh.member_leave(pair, "B", 3, {"A": 47568})
    with pytest.raises(GroupDissolvedError):
        gecdh.controller_leave(gecdh.singleton(A), 3, {})
    with pytest.raises(DuplicateMemberError):
        gecdh.init_pair(A, A)


def test_two_member_leave_leaves_singleton():
    pair = gecdh.init_pair(A, B)
    st_, bc = gecdh.member_leave(pair, "A", 17, {"B": 13525})
    assert st_.members == ("B",)
    assert st_.regional_key == scalar_mult(17, C.G, C)
    assert bc.partials == {}


def test_stale_epoch_rejected():
    st_, bc = gecdh.join(gecdh.init_pair(A, B), CC)
    view = gecdh.accept(None, A, bc)
    assert view.key == Point(120, 31)
    with pytest.raises(StaleEpochError):
        gecdh.accept(view, A, bc)


def test_broadcast_round_trip():
    _, bc = gecdh.join(gecdh.init_pair(A, B), CC)
    again = gecdh.RekeyBroadcast.from_bytes(bc.to_bytes())
    assert again == bc


@settings(max_examples=40)
@given(st.lists(st.tuples(st.sampled_from(["join", "leave", "ctrl"]), st.integers(1, 2**30)), max_size=12),
       st.integers(0, 2**32))
def test_random_sequences_keep_invariant(ops, seed):
    rng = random.Random(seed)
    curve = TOY_31
    scalars = {"m0": rng.randrange(1, curve.n)}
    st_ = gecdh.singleton(Member("m0", scalars["m0"], curve))
    views = {}
    for i, (op, s) in enumerate(ops):
        fresh = rng.randrange(1, curve.n)
        if op == "join" or len(st_) == 1:
            mid = f"j{i}"
            scalars[mid] = s
            st_, bc = gecdh.join(st_, Member(mid, s, curve))
        elif op == "leave" and len(st_) > 1:
            victim = rng.choice(st_.members[:-1])
            st_, bc = gecdh.member_leave(st_, victim, fresh, scalars)
            del scalars[victim]
            views.pop(victim, None)
            scalars[st_.controller_id] = fresh
        else:
            old = st_.controller_id
            st_, bc = gecdh.controller_leave(st_, fresh, scalars)
            del scalars[old]
            views.pop(old, None)
            scalars[st_.controller_id] = fresh
        check_invariant(st_, scalars)
        for m in bc.partials:
            views[m] = gecdh.accept(views.get(m), Member(m, scalars[m], curve), bc)
            assert views[m].key == st_.regional_key
