import sys
import itertools

import numpy as np
import pytest

from sumset_lab.zp import ZpSet, modp, set_from_elements

SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101]


def naive_rep(a, b):
    p = a.ctx.modulus
    r = {}
    for x in a.elements():
        for y in b.elements():
            s = (x + y) % p if a.ctx.is_modp else x + y
            r[s] = r.get(s, 0) + 1
    return r


def all_aps(p):
    """Every arithmetic progression of Z_p as a frozenset, enumerated literally."""
    seen = {frozenset()}
    for d in range(1, p):
        for x in range(p):
            for length in range(1, p + 1):
                seen.add(frozenset((x + j * d) % p for j in range(length)))
    return seen


def random_set(rng, ctx, lo=1, hi=None):
    hi = ctx.modulus if hi is None else hi
    k = int(rng.integers(lo, hi + 1))
    return ZpSet.from_array(ctx, np.sort(rng.choice(ctx.modulus, size=k, replace=False)))


@pytest.fixture
def z5():
    return modp(5)


@pytest.fixture
def z11():
    return modp(11)


@pytest.fixture
def z13():
    return modp(13)


def S(ctx, *xs):
    return set_from_elements(ctx, xs)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
