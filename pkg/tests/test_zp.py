import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sumset_lab.errors import CompositeModulus, OutOfRange, ZeroStep, ZeroWindow
from sumset_lab.zp import (
    IntervalZp,
    Mode,
    ProgressionZp,
    ZpSet,
    fibre_decompose,
    interval,
    is_prime,
    line,
    make_context,
    modp,
    parse,
    parse_instance_line,
    format_instance_line,
    serialize,
    set_from_elements,
    translate,
    dilate,
)

from conftest import S


def test_make_context():
    assert make_context(Mode.MOD_P, 7).p == 7
    with pytest.raises(CompositeModulus):
        make_context("modp", 9)
    ctx = make_context("line", 1000)
    assert ctx.modulus == 1000 and ctx.p is None
    with pytest.raises(ZeroWindow):
        make_context("line", 0)


def test_is_prime_matches_trial_division():
    def slow(n):
        return n >= 2 and all(n % q for q in range(2, int(n ** 0.5) + 1))

    assert [n for n in range(3000) if is_prime(n)] == [n for n in range(3000) if slow(n)]
    assert is_prime(2**61 - 1) and not is_prime(2**61 + 1)
    # strong pseudoprime to bases 2..37 would need >3e24; Carmichael numbers must fail
    for n in (561, 1105, 1729, 2465, 2821, 6601, 3215031751):
        assert not is_prime(n)


def test_set_from_elements(z5):
    z7 = modp(7)
    s = set_from_elements(z7, [3, 3, 1])
    assert s.elements() == (1, 3) and s.size == 2
    assert set_from_elements(z5, range(5)) == ZpSet.full(z5)
    with pytest.raises(OutOfRange):
        set_from_elements(z5, [7])
    assert set_from_elements(z5, [7], reduce=True).elements() == (2,)


def test_translate_examples(z5):
    assert translate(S(z5, 0, 1), 4).elements() == (0, 4)
    s = S(z5, 1, 3)
    assert translate(s, 0) == s
    # direct enumeration: {2+3, 3+3} mod 5
    assert translate(S(z5, 2, 3), 3).elements() == tuple(sorted({(2 + 3) % 5, (3 + 3) % 5}))


def test_translate_line_bounds():
    w = line(10)
    s = set_from_elements(w, [2, 5])
    assert translate(s, 4).elements() == (6, 9)
    assert translate(s, -2).elements() == (0, 3)
    with pytest.raises(OutOfRange):
        translate(s, 5)
    with pytest.raises(OutOfRange):
        translate(s, -3)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([2, 3, 5, 7, 31, 97]), st.data())
def test_translate_is_bijection(p, data):
    ctx = modp(p)
    elems = data.draw(st.lists(st.integers(0, p - 1), max_size=p))
    t = data.draw(st.integers(-3 * p, 3 * p))
    s = set_from_elements(ctx, elems)
    moved = translate(s, t)
    assert len(moved) == len(s)
    assert moved.elements() == tuple(sorted({(x + t) % p for x in s}))
    assert translate(moved, -t) == s


def test_fibre_examples():
    w = line(10)
    assert list(fibre_decompose(interval(w, 0, 10), 3).sizes()) == [4, 3, 3]
    fd = fibre_decompose(ZpSet.empty(modp(11)), 5)
    assert len(fd.fibres) == 5 and all(len(f) == 0 for f in fd.fibres)
    fd = fibre_decompose(set_from_elements(line(8), [0, 2, 4, 6]), 2)
    assert fd[0].elements() == (0, 2, 4, 6) and len(fd[1]) == 0
    with pytest.raises(ZeroStep):
        fibre_decompose(fd.base, 0)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 199), max_size=120), st.integers(1, 40))
def test_fibres_partition(elems, d):
    s = set_from_elements(line(200), elems)
    fd = fibre_decompose(s, d)
    assert sum(fd.sizes()) == len(s)
    union = ZpSet.empty(s.ctx)
    for x, f in enumerate(fd.fibres):
        assert (union & f).size == 0
        union = union | f
        assert all(e % d == x for e in f)
    assert union == s


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 150), st.integers(0, 150), st.integers(1, 30))
def test_interval_fibre_bounds(left, length, d):
    w = line(400)
    fd = fibre_decompose(interval(w, left, length), d)
    for size in fd.sizes():
        assert length / d - 1 <= size <= length / d + 1


def test_interval_and_progression_sets(z11):
    assert IntervalZp(z11, 9, 4).to_set().elements() == (0, 1, 9, 10)
    assert IntervalZp(z11, 9, 4).right == 1
    assert ProgressionZp(z11, 2, 2, 3).to_set().elements() == (2, 4, 6)
    assert ProgressionZp(z11, 5, 3, 11).to_set() == ZpSet.full(z11)
    assert len(IntervalZp(z11, 3, 0).to_set()) == 0


def test_serialization_roundtrip(z13):
    s = S(z13, 12, 0, 5)
    text = serialize(s)
    assert text == "0,5,12"
    assert parse(z13, text) == s
    assert parse(z13, "") == ZpSet.empty(z13)
    b = S(z13, 1, 2)
    line_text = format_instance_line(s, b)
    assert line_text == "p=13;A=0,5,12;B=1,2"
    ctx, a2, b2 = parse_instance_line(line_text)
    assert ctx == z13 and a2 == s and b2 == b


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 96), max_size=97))
def test_serialize_canonical(elems):
    ctx = modp(97)
    s = set_from_elements(ctx, elems)
    again = set_from_elements(ctx, list(reversed(elems)) + elems)
    assert serialize(s) == serialize(again)
    assert parse(ctx, serialize(s)) == s


def test_dilate(z11):
    s = S(z11, 1, 2, 3)
    assert dilate(s, 3).elements() == (3, 6, 9)
    assert dilate(dilate(s, 3), pow(3, -1, 11)) == s
    with pytest.raises(ZeroStep):
        dilate(s, 11)


def test_min_max_and_membership(z11):
    s = S(z11, 4, 7, 10)
    assert s.min() == 4 and s.max() == 10
    assert 7 in s and 5 not in s and 50 not in s
    assert np.array_equal(s.array(), [4, 7, 10])
