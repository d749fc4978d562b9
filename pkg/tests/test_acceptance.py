"""One test per acceptance criterion; each prints a PASS/FAIL verdict line."""

import random
import subprocess
import sys
import time
from pathlib import Path

from churn import run_sequence
from regionkey import bench, gecdh, tgecdh, worked_examples
from regionkey.cli import SHARE_DEMO
from regionkey.ec import E211, E751, Point, order_of, point_add
from regionkey.gecdh import Member
from regionkey.message import decrypt, encrypt, shared_scalar
from regionkey.metrics import metered
from regionkey.region import NodeProfile, RegionConfig, form_subgroups
from regionkey.simnet import Network, run_scenario

ROOT = Path(__file__).resolve().parent.parent


def verdict(report, n, ok, detail):
    report(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_1_pair_key(acceptance_report):
    start = time.perf_counter()
    c = E211
    pair = gecdh.init_pair(Member("A", 47568, c), Member("B", 13525, c))
    key = pair.regional_key
    cross = shared_scalar(key, c) == 229
    (dev,) = [ch for ch in worked_examples.subgroup_checks() if "(120,180)" == ch.printed]
    elapsed = time.perf_counter() - start
    ok = key == Point(155, 115) and cross and dev.status == worked_examples.DEVIATION and elapsed < 1
    verdict(acceptance_report, 1, ok, f"KR={key}, dlog=229 {cross}, (120,180) {dev.status}, {elapsed:.3f}s")


def test_2_join(acceptance_report):
    c = E211
    A, B = Member("A", 47568, c), Member("B", 13525, c)
    state, bc = gecdh.join(gecdh.init_pair(A, B), Member("C", 82910, c))
    got = (state.regional_key, bc.partials["A"], bc.partials["B"],
           gecdh.recompute_key(A, bc), gecdh.recompute_key(B, bc))
    want = (Point(120, 31), Point(131, 84), Point(147, 97), Point(120, 31), Point(120, 31))
    verdict(acceptance_report, 2, got == want, f"KR'={got[0]}, partials {got[1]} {got[2]}, A/B recompute {got[3]} {got[4]}")


def test_3_outer_tree(acceptance_report):
    c = E751
    s = tgecdh.create(Member("M1", 1772, c), "root")
    s, _ = tgecdh.join_gateway(s, Member("M2", 1949, c))
    pair = s.root_point
    s, _ = tgecdh.join_gateway(s, Member("M3", 14755, c), 2835)
    (check,) = [ch for ch in worked_examples.outer_checks() if "M3 joins" in ch.label]
    ok = pair == Point(540, 111) and s.root_point == Point(664, 736) and "root insertion" in check.note
    verdict(acceptance_report, 3, ok, f"pair root {pair}, after M3 {s.root_point} (root insertion)")


def test_4_encryption(acceptance_report):
    want = "(32,108):(16,100):(72,197):(133,163):(164,197):(12,205):(131,84):(167,181)"
    ct = encrypt(b"dh1.png", Point(155, 115), 75, E211)
    plain = decrypt(ct, Point(155, 115))
    ok = str(ct) == want and plain == b"dh1.png"
    verdict(acceptance_report, 4, ok, f"ciphertext {ct}, decrypts to {plain!r}")


def test_5_order_by_brute_force(acceptance_report):
    c = E211
    P, k = c.G, 1
    while not P.is_infinity:
        P, k = point_add(P, c.G, c), k + 1
    ok = k == 241 == order_of(c.G, c) == c.n
    verdict(acceptance_report, 5, ok, f"ord((2,2)) = {k} by repeated addition")


def test_6_property_suite(acceptance_report):
    start = time.perf_counter()
    problems = []
    for seed in range(200):
        problems += run_sequence(seed)
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 30
    verdict(acceptance_report, 6, ok,
            f"200 sequences, {len(problems)} problems, {elapsed:.1f}s" + (f"; first: {problems[0]}" if problems else ""))


def test_7_communication_flow(acceptance_report):
    region = form_subgroups([NodeProfile(f"m{i}", i % 4, 1, 1) for i in range(12)],
                            RegionConfig(max_subgroup_size=4), random.Random(7))
    net = Network(region, random.Random(7))
    a, b = list(region.subgroups.values())[:2]
    src = next(m for m in a.members if m != a.gateway)
    dst = next(m for m in b.members if m != b.gateway)
    with metered() as m:
        got = net.send(src, dst, b"cross-region payload")
    relay = m.snapshot()
    with metered() as m:
        net.multicast_region(src, b"local query")
    local = m.snapshot()
    ok = (relay["encrypt"], relay["decrypt"]) == (3, 3) and got == b"cross-region payload" \
        and local.get("kg_encrypt", 0) == local.get("kg_decrypt", 0) == 0
    verdict(acceptance_report, 7, ok,
            f"relay {relay['encrypt']} enc / {relay['decrypt']} dec, plaintext equal {got == b'cross-region payload'}, "
            f"local query KG ops {local.get('kg_encrypt', 0) + local.get('kg_decrypt', 0)}")


def test_8_bench_orderings(acceptance_report, tmp_path):
    start = time.perf_counter()
    rows, parts, ok = [], [], True
    for n in (64, 256, 512):
        cmp = bench.compare(n, 16, bench.make_trace(n, 3, 3, random.Random(0)))
        rows += cmp.rows()
        j, l = cmp.ordering("join"), cmp.ordering("leave")
        ok &= j and l
        parts.append(f"N={n} join {'<'.join(str(round(cmp.costs[s].mean('join'))) for s in ('Region', 'TGDH', 'GDH'))}"
                     f" leave {'<'.join(str(round(cmp.costs[s].mean('leave'))) for s in ('Region', 'TGDH', 'GDH'))}")
    keys = bench.storage_per_node(1024, 99)
    rows += bench.storage_rows(1024, 99)
    storage_ok = keys["Region"] <= keys["TGDH"] < keys["GDH"]
    out = tmp_path / "costs.csv"
    out.write_text(bench.to_csv(rows))
    elapsed = time.perf_counter() - start
    ok = ok and storage_ok and out.stat().st_size > 0 and elapsed < 60
    parts.append(f"keys/node at 1024: Region {keys['Region']:.2f} TGDH {keys['TGDH']:.0f} GDH {keys['GDH']:.0f}")
    verdict(acceptance_report, 8, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_9_share_layer(acceptance_report):
    sim = run_scenario(SHARE_DEMO, seed=0)
    share = sim.share
    query = {**share.open, **share.closed}["m2#1"]
    hits = [(r.responder, m["name"]) for r in query.responses for m in r.matches]
    published = {it.name: it.content for idx in share.indexes.values() for it in idx.values()}
    content = share.transfer("m2", "m11", "dh1.png")
    leaked = [w.kind for w in sim.net.wire for body in published.values() if body in w.data]
    ok = hits == [("m11", "dh1.png")] and content == published["dh1.png"] and not leaked
    verdict(acceptance_report, 9, ok,
            f"responses {hits}, transfer identical {content == published['dh1.png']}, "
            f"{len(sim.net.wire)} wire messages with {len(leaked)} plaintext leaks")


def test_10_determinism(acceptance_report):
    cmd = [sys.executable, "-m", "regionkey", "run-scenario", str(ROOT / "scenarios" / "sample.scn"), "--seed", "42"]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    ok = a.returncode == b.returncode == 0 and a.stdout == b.stdout and len(a.stdout) > 0
    verdict(acceptance_report, 10, ok, f"two runs with seed 42: {len(a.stdout)} bytes each, identical {a.stdout == b.stdout}")
