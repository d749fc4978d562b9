import pytest

from regionkey.ec import INFINITY, E211, E751, TOY_31, Point
from regionkey.errors import CurveError, MalformedPointError
from regionkey.wire import Reader, WireError, Writer, encode_point, point_size


def test_point_encoding_layout():
    assert encode_point(Point(155, 115), E211) == bytes([4, 155, 115])
    assert encode_point(INFINITY, E211) == b"\x00"
    assert encode_point(Point(540, 111), E751) == bytes([4, 2, 28, 0, 111])
    assert point_size(TOY_31.G, TOY_31) == 9


def test_round_trip_all_fields():
    data = (Writer().u8(7).u16(513).u32(70000).varint(2**70).str("héllo")
            .point(Point(155, 115), E211).point(INFINITY, E211).str(E751.name).frame())
    r = Reader(data, framed=True)
    assert (r.u8(), r.u16(), r.u32(), r.varint(), r.str()) == (7, 513, 70000, 2**70, "héllo")
    assert r.point(E211) == Point(155, 115)
    assert r.point(E211) == INFINITY
    assert r.curve() is E751
    r.done()


def test_truncated_and_trailing():
    data = Writer().u32(5).frame()
    with pytest.raises(WireError):
        Reader(data[:-1], framed=True)
    with pytest.raises(WireError):
        Reader(b"\x00\x01", framed=True)
    r = Reader(Writer().u8(1).u8(2).body())
    r.u8()
    with pytest.raises(WireError):
        r.done()
    with pytest.raises(WireError):
        Reader(b"\x01").u16()


def test_bad_points_rejected():
    with pytest.raises(WireError):
        Reader(bytes([2, 1, 1])).point(E211)
    with pytest.raises(MalformedPointError):
        Reader(bytes([4, 21, 103])).point(E211)


def test_unknown_curve_and_long_string():
    with pytest.raises(CurveError):
        Reader(Writer().str("no-such-curve").body()).curve()
    with pytest.raises(WireError):
        Writer().str("x" * 256)
