"""Finite integer domains stored as ordered disjoint inclusive ranges.

A domain is a set of integers kept as a tuple of ``(lo, hi)`` pairs,
sorted ascending, pairwise disjoint and non-adjacent.  The empty tuple is
the empty domain.  Values are immutable; every mutating operation returns
a new domain, which is what makes trailing in the solver cheap (old
domains are kept by reference).
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence, Tuple

Range = Tuple[int, int]


class DomainParseError(ValueError):
    """Raised for malformed domain text; carries the offending position."""

    def __init__(self, text: str, pos: int, reason: str):
        super().__init__(f"bad domain {text!r} at position {pos}: {reason}")
        self.pos = pos
        self.reason = reason


def _normalize(ranges: Iterable[Range]) -> Tuple[Range, ...]:
    pairs = sorted(ranges)
    out: list[Range] = []
    for lo, hi in pairs:
        if lo > hi:
            raise ValueError(f"reversed range {lo}-{hi}")
        if out and lo <= out[-1][1] + 1:
            prev_lo, prev_hi = out[-1]
            if hi > prev_hi:
                out[-1] = (prev_lo, hi)
        else:
            out.append((lo, hi))
    return tuple(out)


class FiniteDomain:
    """An immutable set of integers represented by inclusive ranges."""

    __slots__ = ("ranges",)

    def __init__(self, ranges: Iterable[Range] = (), _raw: bool = False):
        # _raw skips normalization for internal callers that guarantee it.
        object.__setattr__(self, "ranges", tuple(ranges) if _raw else _normalize(ranges))

    def __setattr__(self, name, value):
        raise AttributeError("FiniteDomain is immutable")

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "FiniteDomain":
        return cls((v, v) for v in values)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "FiniteDomain":
        if lo > hi:
            return EMPTY_DOMAIN
        return cls(((lo, hi),), _raw=True)

    # -- basic queries ------------------------------------------------

    def is_empty(self) -> bool:
        return not self.ranges

    def is_singleton(self) -> bool:
        r = self.ranges
        return len(r) == 1 and r[0][0] == r[0][1]

    def size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.ranges)

    def min(self) -> int:
        if not self.ranges:
            raise ValueError("min of empty domain")
        return self.ranges[0][0]

    def max(self) -> int:
        if not self.ranges:
            raise ValueError("max of empty domain")
        return self.ranges[-1][1]

    def contains(self, v: int) -> bool:
        ranges = self.ranges
        lo, hi = 0, len(ranges)
        while lo < hi:
            mid = (lo + hi) // 2
            a, b = ranges[mid]
            if v < a:
                hi = mid
            elif v > b:
                lo = mid + 1
            else:
                return True
        return False

    def values(self) -> Iterator[int]:
        for lo, hi in self.ranges:
            yield from range(lo, hi + 1)

    def next_above(self, v: int) -> int | None:
        """Smallest member strictly greater than ``v``, or None."""
        for lo, hi in self.ranges:
            if hi > v:
                return max(lo, v + 1)
        return None

    def next_below(self, v: int) -> int | None:
        """Largest member strictly smaller than ``v``, or None."""
        for lo, hi in reversed(self.ranges):
            if lo < v:
                return min(hi, v - 1)
        return None

    # -- derived domains ----------------------------------------------

    def remove_range(self, lo: int, hi: int) -> tuple["FiniteDomain", "FiniteDomain"]:
        """Remove [lo, hi]; returns (new domain, withdrawn values)."""
        if lo > hi:
            raise ValueError(f"reversed removal bounds {lo}..{hi}")
        kept: list[Range] = []
        gone: list[Range] = []
        for a, b in self.ranges:
            if b < lo or a > hi:
                kept.append((a, b))
                continue
            if a < lo:
                kept.append((a, lo - 1))
            if b > hi:
                kept.append((hi + 1, b))
            gone.append((max(a, lo), min(b, hi)))
        if not gone:
            return self, EMPTY_DOMAIN
        return FiniteDomain(kept, _raw=True), FiniteDomain(gone, _raw=True)

    def remove_value(self, v: int) -> "FiniteDomain":
        if not self.contains(v):
            return self
        return self.remove_range(v, v)[0]

    def clamp(self, lo: int, hi: int) -> "FiniteDomain":
        """Intersection with the interval [lo, hi]."""
        if lo > hi:
            return EMPTY_DOMAIN
        kept = [
            (max(a, lo), min(b, hi))
            for a, b in self.ranges
            if b >= lo and a <= hi
        ]
        return FiniteDomain(kept, _raw=True)

    def intersect(self, other: "FiniteDomain") -> "FiniteDomain":
        out: list[Range] = []
        i = j = 0
        ra, rb = self.ranges, other.ranges
        while i < len(ra) and j < len(rb):
            a1, b1 = ra[i]
            a2, b2 = rb[j]
            lo, hi = max(a1, a2), min(b1, b2)
            if lo <= hi:
                out.append((lo, hi))
            if b1 < b2:
                i += 1
            else:
                j += 1
        return FiniteDomain(out, _raw=True)

    def difference(self, other: "FiniteDomain") -> "FiniteDomain":
        out = self
        for lo, hi in other.ranges:
            out = out.remove_range(lo, hi)[0]
        return out

    def shift(self, k: int) -> "FiniteDomain":
        return FiniteDomain(tuple((a + k, b + k) for a, b in self.ranges), _raw=True)

    def disjoint(self, other: "FiniteDomain") -> bool:
        i = j = 0
        ra, rb = self.ranges, other.ranges
        while i < len(ra) and j < len(rb):
            a1, b1 = ra[i]
            a2, b2 = rb[j]
            if max(a1, a2) <= min(b1, b2):
                return False
            if b1 < b2:
                i += 1
            else:
                j += 1
        return True

    # -- equality / repr ----------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteDomain) and self.ranges == other.ranges

    def __hash__(self) -> int:
        return hash(self.ranges)

    def __repr__(self) -> str:
        return f"FiniteDomain({format_domain(self)!r})"


EMPTY_DOMAIN = FiniteDomain()


def format_domain(d: FiniteDomain) -> str:
    """Canonical bracketed notation; singleton ranges print as one integer."""
    parts = []
    for lo, hi in d.ranges:
        parts.append(str(lo) if lo == hi else f"{lo}-{hi}")
    return "[" + ",".join(parts) + "]"


def parse_domain(text: str) -> FiniteDomain:
    """Parse bracketed range notation, the inverse of :func:`format_domain`.

    Accepts ``[`` range (``,`` range)* ``]`` where a range is ``int`` or
    ``int-int``.  Raises :class:`DomainParseError` with the offending
    position on malformed input.
    """
    s = text.strip()
    if not s.startswith("["):
        raise DomainParseError(text, 0, "expected '['")
    if not s.endswith("]"):
        raise DomainParseError(text, len(text) - 1, "expected ']'")
    body = s[1:-1].strip()
    if not body:
        return EMPTY_DOMAIN
    ranges: list[Range] = []
    pos = 1
    for chunk in body.split(","):
        item = chunk.strip()
        if not item:
            raise DomainParseError(text, pos, "empty range")
        # A leading '-' is a sign, later ones separate bounds.
        sep = item.find("-", 1)
        try:
            if sep == -1:
                lo = hi = int(item)
            else:
                lo = int(item[:sep])
                hi = int(item[sep + 1:])
        except ValueError:
            raise DomainParseError(text, pos, f"bad integer in {item!r}") from None
        if lo > hi:
            raise DomainParseError(text, pos, f"reversed bounds {lo}-{hi}")
        ranges.append((lo, hi))
        pos += len(chunk) + 1
    return FiniteDomain(ranges)
