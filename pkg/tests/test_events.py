import itertools
import random

import pytest

from codeine.domain import parse_domain
from codeine.events import (
    ABSENT,
    EventFormatError,
    PORTS,
    order_attributes,
    parse_event,
    parse_line,
    serialize_event,
    values_line,
)

REDUCE_ATTRS = {
    "chrono": 1145697,
    "time": 1045,
    "cident": "c12",
    "vident": "v13",
    "cexternal": "greaterEq(v13,v19)",
    "delta": parse_domain("[0-21]"),
    "update": "min",
    "depth": 3,
    "node": 7,
    "stage": "labeling",
    "vdom": parse_domain("[22-80]"),
}


def getter(attrs):
    return lambda name: attrs.get(name, ABSENT)


def test_fifteen_ports():
    assert len(PORTS) == 15
    assert len(set(PORTS)) == 15


def test_minimal_excerpt():
    line = serialize_event(getter(REDUCE_ATTRS), "reduce", ["time", "vident"])
    assert line == '<reduce time="1045" vident="v13" />'
    assert "\n" not in line


def test_full_excerpt_with_children():
    requested = ["chrono", "time", "cident", "vident", "cexternal", "delta", "update"]
    line = serialize_event(getter(REDUCE_ATTRS), "reduce", requested)
    event = parse_event(line)
    assert event.port == "reduce"
    assert event.attrs["chrono"] == 1145697
    assert event.attrs["cexternal"] == "greaterEq(v13,v19)"
    assert event.attrs["delta"] == parse_domain("[0-21]")
    assert event.attrs["update"] == "min"
    assert "\n" not in line
    # nested elements, not attributes
    assert "<delta vident=\"v13\">" in line
    assert "<update vident=\"v13\" type=\"min\" />" in line


def test_sync_and_matched_markers():
    line = serialize_event(getter({"chrono": 1}), "beginExec", ["chrono"], ["step"], True)
    assert line == '<beginExec chrono="1" matched="step" sync="true" />'
    event = parse_event(line)
    assert event.sync is True
    assert event.matched == ("step",)


def test_requesting_absent_attribute_is_an_error():
    with pytest.raises(EventFormatError):
        serialize_event(getter({"chrono": 1}), "solution", ["vident"])


def test_unknown_port_and_unknown_attr():
    with pytest.raises(EventFormatError):
        serialize_event(getter(REDUCE_ATTRS), "bogus", ["chrono"])
    with pytest.raises(EventFormatError):
        serialize_event(getter(REDUCE_ATTRS), "reduce", ["nonsense"])


def test_parse_round_trip_projection():
    requested = ["chrono", "vident", "vdom", "stage"]
    line = serialize_event(getter(REDUCE_ATTRS), "reduce", requested)
    event = parse_event(line)
    assert set(event.attrs) == set(requested) | {"port"}
    for attr in requested:
        assert event.attrs[attr] == REDUCE_ATTRS[attr]


def test_parse_rejects_unknown_element():
    with pytest.raises(EventFormatError):
        parse_event("<bogus/>")
    with pytest.raises(EventFormatError):
        parse_event("not xml at all")


def test_parse_bare_solution():
    event = parse_event('<solution chrono="38"/>')
    assert event.port == "solution"
    assert event.attrs["chrono"] == 38


def test_excerpt_property_subsets_nest():
    # serializing with a subset of attributes yields a subset of the
    # parsed attribute map, with identical values on the intersection
    pool = ["chrono", "time", "cident", "vident", "vdom", "delta", "update", "stage"]
    rng = random.Random(7)
    for _ in range(50):
        s2 = rng.sample(pool, rng.randint(1, len(pool)))
        s1 = rng.sample(s2, rng.randint(0, len(s2)))
        small = parse_event(serialize_event(getter(REDUCE_ATTRS), "reduce", s1))
        big = parse_event(serialize_event(getter(REDUCE_ATTRS), "reduce", s2))
        assert set(small.attrs) <= set(big.attrs)
        for attr, value in small.attrs.items():
            assert big.attrs[attr] == value


def test_escaping():
    attrs = {"chrono": 1, "cident": "c1", "cexternal": 'a<b&"q"'}
    line = serialize_event(getter(attrs), "post", ["chrono", "cident", "cexternal"])
    assert parse_event(line).attrs["cexternal"] == 'a<b&"q"'


def test_values_line_skips_absent():
    attrs = {"chrono": 5, "vident": "v2", "vdom": parse_domain("[2,5,7]")}
    line = values_line(getter(attrs), ["vident", "vdom", "cident"])
    msg = parse_line(line)
    assert msg.kind == "values"
    assert msg.attrs["chrono"] == 5
    assert msg.attrs["vident"] == "v2"
    assert msg.attrs["vdom"] == parse_domain("[2,5,7]")
    assert "cident" not in msg.attrs


def test_parse_line_classifies_control():
    assert parse_line("<ok/>").kind == "ok"
    err = parse_line('<error code="parse" msg="boom" />')
    assert err.kind == "error"
    assert err.attrs["code"] == "parse"
    hs = parse_line('<codeine version="1"/>')
    assert hs.kind == "handshake"
    assert hs.attrs["version"] == "1"


def test_order_attributes_cost_ranking():
    assert order_attributes(["depth", "chrono", "node"]) == ["chrono", "depth", "node"]
    assert order_attributes(["vname", "port", "cname"]) == ["port", "vname", "cname"]
    assert order_attributes(["cexternal", "vdom", "chrono", "vdom"]) == [
        "chrono", "vdom", "cexternal",
    ]
