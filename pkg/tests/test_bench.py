import random

import pytest

from regionkey import bench
from regionkey.bench import DH_G, DH_P, DH_Q, GDHGroup, TGDHGroup
from regionkey.errors import ComparisonInvalidError
from regionkey.metrics import metered


def test_baseline_group_parameters():
    assert pow(DH_G, DH_Q, DH_P) == 1 and DH_P == 2 * DH_Q + 1
    assert pow(3, DH_P - 1, DH_P) == 1 and pow(3, DH_Q - 1, DH_Q) == 1


def test_gdh_message_closed_forms():
    n = 8
    leave = bench.run_baseline_gdh(n, [("leave", "m3")])
    assert leave.events[0].messages == 2 * (n - 2)
    join = bench.run_baseline_gdh(n, [("join", "x")])
    assert join.events[0].messages == 3 * n


def test_tgdh_join_messages_and_depth():
    n = 8
    cost = bench.run_baseline_tgdh(n, [("join", "x")])
    assert cost.events[0].messages == 2 * n
    with metered():
        g = TGDHGroup(bench.initial_members(n), random.Random(0))
    assert {g.depth(m) for m in g.leaves} == {3}
    assert g.keys_per_node() == 7


@pytest.mark.parametrize("cls", [GDHGroup, TGDHGroup])
def test_baselines_agree_over_random_events(cls):
    rng = random.Random(11)
    with metered():
        g = cls(bench.initial_members(6), rng)
        live = list(bench.initial_members(6))
        for i in range(20):
            if rng.random() < 0.5 and len(live) > 2:
                mid = live.pop(rng.randrange(len(live)))
                g.leave(mid)
            else:
                live.append(f"x{i}")
                g.join(f"x{i}")
            assert g.agreed()
        if cls is TGDHGroup:
            assert len({g.root_from(m) for m in g.leaves}) == 1


def test_two_members_cost_nearly_the_same():
    cmp = bench.compare(2, 2, [("join", "x1"), ("leave", "m1")])
    joins = [cmp.costs[s].events[0].messages for s in ("Region", "TGDH", "GDH")]
    assert max(joins) - min(joins) <= 4


@pytest.mark.parametrize("trace,msg", [
    ([("join", "m1")], "existing"),
    ([("leave", "zz")], "non-member"),
    ([("leave", "m1"), ("leave", "m2")], "below two"),
])
def test_invalid_traces(trace, msg):
    with pytest.raises(ComparisonInvalidError, match=msg):
        bench.compare(3, 2, trace)


def test_read_trace(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# events\njoin x1\nleave m2  # bye\n")
    assert bench.read_trace(p) == [("join", "x1"), ("leave", "m2")]
    p.write_text("hop m1\n")
    with pytest.raises(ComparisonInvalidError):
        bench.read_trace(p)


def test_make_trace_is_valid_and_balanced():
    trace = bench.make_trace(10, 3, 2, random.Random(4))
    assert [k for k, _ in trace].count("join") == 3 and [k for k, _ in trace].count("leave") == 2
    bench.validate_trace(10, trace)


def test_csv_is_deterministic():
    trace = bench.make_trace(32, 2, 2, random.Random(1))
    a = bench.to_csv(bench.compare(32, 8, trace, seed=5).rows())
    b = bench.to_csv(bench.compare(32, 8, trace, seed=5).rows())
    assert a == b
    assert a.splitlines()[0] == ",".join(bench.CSV_HEADER)


def test_orderings_at_small_n():
    trace = bench.make_trace(64, 3, 3, random.Random(0))
    cmp = bench.compare(64, 16, trace)
    assert cmp.ordering("join") and cmp.ordering("leave")


def test_storage_model():
    keys = bench.storage_per_node(64, 16)
    assert keys["GDH"] == 65
    assert keys["Region"] <= keys["TGDH"] < keys["GDH"]
