import random

import pytest

from codeine.domain import (
    EMPTY_DOMAIN,
    DomainParseError,
    FiniteDomain,
    format_domain,
    parse_domain,
)


def test_parse_trace_notation():
    d = parse_domain("[0-1,3-4,6,8-268435455]")
    assert d.ranges == ((0, 1), (3, 4), (6, 6), (8, 268435455))


def test_parse_empty():
    assert parse_domain("[]") is EMPTY_DOMAIN or parse_domain("[]").is_empty()


def test_parse_reversed_bounds_rejected():
    with pytest.raises(DomainParseError) as err:
        parse_domain("[5-3]")
    assert err.value.pos is not None


@pytest.mark.parametrize("text", ["", "[", "1-3]", "[1-3", "[a]", "[1,,2]", "[1-2-3]"])
def test_parse_malformed(text):
    with pytest.raises(DomainParseError):
        parse_domain(text)


def test_format_collapses_singletons_to_ranges():
    assert format_domain(FiniteDomain(((1, 3),))) == "[1-3]"
    assert format_domain(EMPTY_DOMAIN) == "[]"
    assert format_domain(FiniteDomain(((0, 0), (4, 268435455)))) == "[0,4-268435455]"
    assert format_domain(FiniteDomain.from_values([2, 5, 7])) == "[2,5,7]"


def test_parse_format_inverse():
    for text in ("[1-3]", "[]", "[2,5,7]", "[0,4-268435455]", "[-5--2,0]"):
        assert format_domain(parse_domain(text)) == text


def test_normalization_merges_adjacent_and_overlapping():
    d = FiniteDomain([(5, 9), (1, 3), (4, 4)])
    assert d.ranges == ((1, 9),)
    assert format_domain(parse_domain("[1,2,3]")) == "[1-3]"


def test_contains():
    d = FiniteDomain.from_values([2, 5, 7])
    assert d.contains(5)
    assert not d.contains(4)
    assert not EMPTY_DOMAIN.contains(0)


def test_min_max_size():
    d = parse_domain("[0-268435455]")
    assert d.min() == 0
    assert d.max() == 268435455
    assert d.size() == 268435456
    with pytest.raises(ValueError):
        EMPTY_DOMAIN.min()
    with pytest.raises(ValueError):
        EMPTY_DOMAIN.max()


def test_remove_range_trace_sequence():
    # the two reductions that shrink the full domain down to 1..3
    d = parse_domain("[0-268435455]")
    d, w1 = d.remove_range(0, 0)
    assert format_domain(w1) == "[0]"
    d, w2 = d.remove_range(4, 268435455)
    assert format_domain(d) == "[1-3]"
    assert format_domain(w2) == "[4-268435455]"


def test_remove_range_rejects_reversed():
    with pytest.raises(ValueError):
        parse_domain("[1-9]").remove_range(5, 2)


def test_remove_range_conservation_property():
    rng = random.Random(20240711)
    for _ in range(200):
        values = sorted(rng.sample(range(0, 60), rng.randint(0, 25)))
        d = FiniteDomain.from_values(values)
        lo = rng.randint(-5, 65)
        hi = lo + rng.randint(0, 20)
        new, gone = d.remove_range(lo, hi)
        assert new.size() + gone.size() == d.size()
        for v in range(-5, 90):
            assert not (new.contains(v) and gone.contains(v))
            assert d.contains(v) == (new.contains(v) or gone.contains(v))


def test_next_above_below():
    d = FiniteDomain.from_values([2, 5, 7])
    assert d.next_above(2) == 5
    assert d.next_above(7) is None
    assert d.next_above(-10) == 2
    assert d.next_below(5) == 2
    assert d.next_below(2) is None


def test_intersect_difference_shift():
    a = parse_domain("[1-10]")
    b = parse_domain("[4-6,9-20]")
    assert format_domain(a.intersect(b)) == "[4-6,9-10]"
    assert format_domain(a.difference(b)) == "[1-3,7-8]"
    assert format_domain(b.shift(-1)) == "[3-5,8-19]"
    assert a.disjoint(parse_domain("[11-20]"))
    assert not a.disjoint(b)


def test_clamp():
    d = parse_domain("[1-4,7-9]")
    assert format_domain(d.clamp(3, 8)) == "[3-4,7-8]"
    assert d.clamp(5, 6).is_empty()


def test_immutable():
    d = parse_domain("[1-3]")
    with pytest.raises(AttributeError):
        d.ranges = ()
