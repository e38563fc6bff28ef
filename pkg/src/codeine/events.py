"""Trace events: the 15 ports, attribute metadata, and XML (de)serialization.

Every execution event is one XML element on the wire, one element per
physical line, no document prologue.  The element name is the port; the
attributes carried are exactly the ones requested for that event, so any
emitted element is an excerpt of the exhaustive one.  ``delta`` and
``update`` travel as nested child elements, everything else as XML
attributes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .domain import FiniteDomain, format_domain, parse_domain

PORTS = (
    "newVariable",
    "newConstraint",
    "post",
    "awake",
    "reduce",
    "suspend",
    "entail",
    "reject",
    "schedule",
    "choicePoint",
    "backTo",
    "failure",
    "solution",
    "beginExec",
    "endExec",
)

PORT_SET = frozenset(PORTS)

VARIABLE_PORTS = frozenset({"newVariable", "reduce"})
CONSTRAINT_PORTS = frozenset(
    {"newConstraint", "post", "awake", "reduce", "suspend", "entail", "reject", "schedule"}
)


class _Absent:
    """Sentinel for an attribute that does not exist on an event."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


ABSENT = _Absent()

# Integer-valued attributes (all others carry strings or domains).
INT_ATTRS = frozenset({"chrono", "depth", "node", "time"})
DOMAIN_ATTRS = frozenset({"vdom", "delta"})

# Attributes that may appear in pattern conditions (the grammar's list).
CONDITION_ATTRS = (
    "vident", "vname", "cident", "cname", "port", "vdom", "delta",
    "chrono", "depth", "time", "stage", "node",
)

# Everything a current(...) action may request.
REQUEST_ATTRS = CONDITION_ATTRS + ("cexternal", "update", "full_dom", "named_vars")

# Aliases accepted in patterns, resolved at parse time.
ATTR_ALIASES = {
    "cstrRep": "cexternal",
    "cinternal": "cexternal",
    "cstr": "cident",
}

# Static cost rank used to order attribute lists cheapest-first.
_COST_ORDER = (
    "chrono", "depth", "node", "port", "stage", "time",
    "vident", "vname", "cident", "cname",
    "vdom", "delta", "update", "cexternal", "full_dom", "named_vars",
)
COST_RANK = {name: i for i, name in enumerate(_COST_ORDER)}

# Canonical order of XML attributes on the wire.  On event elements the
# port is the element name, so serialize_event never emits it as an
# attribute; <values/> replies carry it explicitly.
_XML_ATTR_ORDER = (
    "chrono", "depth", "node", "time", "stage", "port",
    "cident", "cname", "vident", "vname", "cexternal",
    "vdom", "full_dom", "named_vars",
)

_CHILD_ATTRS = ("delta", "update")


class EventFormatError(ValueError):
    """Malformed trace line or an attribute request the event cannot honor."""


def _escape(value: str) -> str:
    return (
        value.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _format_value(attr: str, value) -> str:
    if isinstance(value, FiniteDomain):
        return format_domain(value)
    return str(value)


def serialize_element(
    name: str,
    get: Callable[[str], object],
    requested: Iterable[str],
    matched: Sequence[str] = (),
    sync: bool = False,
) -> str:
    """Render one wire element with exactly the requested attributes.

    ``get`` maps an attribute name to its value or ABSENT.  Requesting an
    attribute absent on this event is an error; callers that tolerate
    partial requests must filter beforehand.  The result is a single
    physical line.
    """
    wanted = set(requested)
    parts = [f"<{name}"]
    for attr in _XML_ATTR_ORDER:
        if attr not in wanted:
            continue
        value = get(attr)
        if value is ABSENT:
            raise EventFormatError(f"attribute {attr!r} absent on <{name}> event")
        parts.append(f' {attr}="{_escape(_format_value(attr, value))}"')
        wanted.discard(attr)
    if matched:
        parts.append(f' matched="{_escape(" ".join(matched))}"')
    if sync:
        parts.append(' sync="true"')

    children = []
    for attr in _CHILD_ATTRS:
        if attr not in wanted:
            continue
        value = get(attr)
        if value is ABSENT:
            raise EventFormatError(f"attribute {attr!r} absent on <{name}> event")
        vident = get("vident")
        ident_part = f' vident="{_escape(str(vident))}"' if vident is not ABSENT else ""
        if attr == "delta":
            ranges = "".join(
                f'<range from="{lo}" to="{hi}" />' for lo, hi in value.ranges
            )
            children.append(f"<delta{ident_part}>{ranges}</delta>")
        else:
            children.append(f'<update{ident_part} type="{_escape(str(value))}" />')
        wanted.discard(attr)

    unknown = wanted - set(_XML_ATTR_ORDER) - set(_CHILD_ATTRS)
    if unknown:
        raise EventFormatError(f"unknown attributes requested: {sorted(unknown)}")

    if children:
        return "".join(parts) + ">" + "".join(children) + f"</{name}>"
    return "".join(parts) + " />"


def serialize_event(get, port: str, requested, matched=(), sync: bool = False) -> str:
    if port not in PORT_SET:
        raise EventFormatError(f"unknown port {port!r}")
    # the element name carries the port; requesting it is a no-op
    wanted = [a for a in requested if a != "port"]
    return serialize_element(port, get, wanted, matched, sync)


@dataclass
class ParsedEvent:
    """A partial trace event reconstructed from one wire line."""

    port: str
    attrs: dict = field(default_factory=dict)
    matched: tuple = ()
    sync: bool = False

    def get(self, attr: str):
        return self.attrs.get(attr, ABSENT)

    @property
    def chrono(self):
        return self.attrs.get("chrono")


def _parse_attr(attr: str, raw: str):
    if attr in INT_ATTRS:
        return int(raw)
    if attr in DOMAIN_ATTRS:
        return parse_domain(raw)
    return raw


def parse_event(line: str) -> ParsedEvent:
    """Parse one event element; round-trips :func:`serialize_event` output."""
    try:
        elem = ET.fromstring(line)
    except ET.ParseError as exc:
        raise EventFormatError(f"malformed trace line: {exc}") from None
    if elem.tag not in PORT_SET:
        raise EventFormatError(f"unknown event element <{elem.tag}>")
    attrs = {}
    matched: tuple = ()
    sync = False
    for key, raw in elem.attrib.items():
        if key == "matched":
            matched = tuple(raw.split())
        elif key == "sync":
            sync = raw == "true"
        else:
            attrs[key] = _parse_attr(key, raw)
    attrs["port"] = elem.tag
    for child in elem:
        if child.tag == "delta":
            ranges = [
                (int(r.attrib["from"]), int(r.attrib["to"]))
                for r in child
                if r.tag == "range"
            ]
            attrs["delta"] = FiniteDomain(ranges)
        elif child.tag == "update":
            attrs["update"] = child.attrib.get("type", "")
        else:
            raise EventFormatError(f"unknown child element <{child.tag}>")
    return ParsedEvent(port=elem.tag, attrs=attrs, matched=matched, sync=sync)


# -- control elements (handshake, acks, current responses) -------------

HANDSHAKE_LINE = '<codeine version="1"/>'
OK_LINE = "<ok/>"

CONTROL_TAGS = frozenset({"codeine", "ok", "error", "values"})


def error_line(code: str, msg: str) -> str:
    return f'<error code="{_escape(code)}" msg="{_escape(msg)}" />'


def values_line(get, attrs: Iterable[str]) -> str:
    """Response to a `current` request: the frozen event's chrono + values."""
    present = ["chrono"]
    for attr in attrs:
        if attr != "chrono" and get(attr) is not ABSENT:
            present.append(attr)
    return serialize_element("values", get, present)


@dataclass
class ControlMessage:
    kind: str                     # "handshake" | "ok" | "error" | "values"
    attrs: dict = field(default_factory=dict)


def parse_line(line: str):
    """Classify one incoming line as a ControlMessage or a ParsedEvent."""
    try:
        elem = ET.fromstring(line)
    except ET.ParseError as exc:
        raise EventFormatError(f"malformed line: {exc}") from None
    tag = elem.tag
    if tag in CONTROL_TAGS:
        if tag == "values":
            attrs = {k: _parse_attr(k, v) for k, v in elem.attrib.items()}
            for child in elem:
                if child.tag == "delta":
                    attrs["delta"] = FiniteDomain(
                        [(int(r.attrib["from"]), int(r.attrib["to"])) for r in child]
                    )
                elif child.tag == "update":
                    attrs["update"] = child.attrib.get("type", "")
            return ControlMessage("values", attrs)
        if tag == "codeine":
            return ControlMessage("handshake", dict(elem.attrib))
        return ControlMessage(tag, dict(elem.attrib))
    return parse_event(line)


def order_attributes(attrs: Iterable[str]) -> list[str]:
    """Unique attribute names ordered by static cost, cheapest first."""
    seen = []
    for a in attrs:
        if a not in seen:
            seen.append(a)
    return sorted(seen, key=lambda a: COST_RANK.get(a, len(COST_RANK)))
