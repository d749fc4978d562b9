from regionkey import worked_examples as we


def by_label(checks, fragment):
    return [c for c in checks if fragment in c.label]


def test_no_failures_and_expected_statuses():
    checks = we.run_all()
    assert not we.failed(checks)
    counts = {s: sum(c.status == s for c in checks) for s in (we.PASS, we.DEVIATION, we.UNDETERMINED)}
    assert counts[we.DEVIATION] == 5 and counts[we.UNDETERMINED] == 2
    assert counts[we.PASS] == len(checks) - 7


def test_key_values_pass():
    checks = we.run_all()
    for fragment in ("pair key held by controller B", "key after C joins", "outer key of M1 and M2",
                     "outer key after M3 joins", "ciphertext of 'dh1.png'"):
        (c,) = by_label(checks, fragment)
        assert c.status == we.PASS, c.line()


def test_inconsistent_pair_point_is_documented():
    (c,) = by_label(we.run_all(), "pair key computed by A")
    assert c.status == we.DEVIATION and c.printed == "(120,180)" and c.computed == "(155,115)"


def test_insertion_shape_is_named():
    (c,) = by_label(we.run_all(), "outer key after M3 joins")
    assert "root insertion" in c.note and "(43,56)" in c.note


def test_report_is_deterministic():
    assert we.report(we.run_all()) == we.report(we.run_all())
    assert we.report(we.run_all()).splitlines()[-1].startswith("summary: PASS=")


def test_brute_force_order():
    assert we.brute_force_order() == 241
