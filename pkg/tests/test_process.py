from fractions import Fraction
from types import SimpleNamespace

import mpmath
import numpy as np
import pytest

from sumset_lab.errors import HypothesisViolated, WrongCase, WrongTerminal
from sumset_lab.kernel import RestrictedPairSet, popularity_partition, rep_profile
from sumset_lab.process import (
    CASE1,
    CASE2,
    COMPLETED,
    ProcessParams,
    check_trace_invariants,
    claim_a_bound,
    claim_b_check,
    run_process,
    shao_surrogate,
    theorem2_budget,
    theorem2_check,
)
from sumset_lab.rng import make_rng
from sumset_lab.zp import ZpSet, is_prime, modp, set_from_elements

from conftest import S

DESK = ProcessParams(Fraction(1, 2), 2, Fraction(1, 10))


def sidon(q):
    """Erdos-Turan set {2qk + (k^2 mod q)} inside Z_p with p prime above 4q^2."""
    p = 4 * q * q + 1
    while not is_prime(p):
        p += 1
    ctx = modp(p)
    return set_from_elements(ctx, [2 * q * k + (k * k) % q for k in range(q)])


def strays_instance(seed=3, p=20011, n=400, strays=15):
    ctx = modp(p)
    rng = make_rng(seed)
    pick = lambda: rng.choice(np.arange(1000, p - 11), strays, replace=False).tolist()
    return set_from_elements(ctx, list(range(n)) + pick()), set_from_elements(ctx, list(range(n)) + pick())


def test_params_derived_values():
    p = DESK
    assert p.s == 200 and p.alpha == Fraction(1, 320)
    want = mpmath.ceil(max(mpmath.mpf(2**10) * 2 / mpmath.mpf("0.1"),
                           2**10 * abs(mpmath.log(mpmath.mpf(1) / 2)) * 320))
    assert p.c == int(want)
    assert ProcessParams(Fraction(1, 2), 2, Fraction(1, 10), c=p.c + 5).c == p.c + 5
    with pytest.raises(ValueError):
        ProcessParams(Fraction(1, 2), 2, Fraction(1, 10), c=10)
    with pytest.raises(ValueError):
        ProcessParams(Fraction(1, 2), 1)


def test_full_group():
    ctx = modp(31)
    full = ZpSet.full(ctx)
    tr = run_process(full, full, DESK)
    st = tr.steps[0]
    assert st.c_minus == 0 and st.gamma == 31 * 31
    assert not st.case1 and not st.case2
    assert tr.terminal == COMPLETED and len(tr.steps) <= DESK.s + 1


def test_singletons():
    ctx = modp(31)
    tr = run_process(S(ctx, 0), S(ctx, 0), DESK)
    assert len(tr.steps) == 1 and tr.steps[0].c_plus == 1
    assert tr.steps[0].removed == (0, 0)


def test_sidon_stops_case2():
    a = sidon(101)
    params = ProcessParams(Fraction(1, 2), 2, Fraction(9, 10))
    tr = run_process(a, a, params)
    assert tr.terminal == CASE2 and len(tr.steps) == 1
    part = popularity_partition(a, a, params.alpha)
    r = rep_profile(a, a).counts
    assert r.max() <= 2
    assert r[part.unpopular.array()].sum() >= params.delta * len(a) ** 2


def random_pair(seed=0, p=20011, n=30):
    ctx = modp(p)
    rng = make_rng(seed)
    return tuple(ZpSet.from_array(ctx, np.sort(rng.choice(p, n, replace=False))) for _ in range(2))


def test_case1_stop():
    a, b = random_pair()
    tr = run_process(a, b, DESK)
    assert tr.terminal == CASE1 and tr.steps[0].c_plus > 10 * 2 * 30


def test_refinement_trace():
    a, b = strays_instance()
    tr = run_process(a, b, DESK)
    assert len(tr.steps) > 5
    inv = check_trace_invariants(tr)
    assert all(inv.values()), inv
    for st in tr.steps[:-1]:
        assert st.removed[0] <= DESK.shrink * len(st.a) and st.removed[1] <= DESK.shrink * len(st.b)
    rate = tr.shao_rate()
    assert rate is not None and 0 <= rate <= 1


def test_surrogate_identity():
    ctx = modp(31)
    a, b = S(ctx, 0, 1, 2), S(ctx, 5, 6)
    assert shao_surrogate(a, b, RestrictedPairSet.full(a, b), Fraction(1, 2)) == (a, b)


def test_surrogate_greedy_order():
    ctx = modp(31)
    a, b = S(ctx, 0, 1, 2, 3), S(ctx, 0, 1, 2, 3)
    # every pair involving a = 3 is unpopular, nothing else is
    pairs = [(x, y) for x in a.elements() for y in b.elements() if x != 3]
    na, nb = shao_surrogate(a, b, RestrictedPairSet.from_pairs(a, b, pairs), Fraction(1, 4))
    assert na == S(ctx, 0, 1, 2)
    # each b meets exactly one unpopular pair; ties go to the smallest element
    assert nb == S(ctx, 1, 2, 3)


def test_claim_a_case1():
    a, b = random_pair()
    n = theorem2_budget(DESK, 30)
    part = popularity_partition(a, b, DESK.alpha)
    assert n * n >= DESK.c * 30
    value = claim_a_bound(a, b, n, n, DESK, 1)
    assert value >= len(part.popular) / 2
    assert value >= 5 * 2 * 30


def test_claim_a_case2():
    a = sidon(101)
    params = ProcessParams(Fraction(1, 2), 2, Fraction(9, 10))
    n = theorem2_budget(params, len(a))
    assert claim_a_bound(a, a, n, n, params, 2) >= params.K * len(a)
    # every sum is unpopular here, so Case 1 degenerates to 0
    assert claim_a_bound(a, a, n, n, params, 1) == 0.0


def test_claim_a_wrong_case():
    ctx = modp(31)
    full = ZpSet.full(ctx)
    with pytest.raises(WrongCase):
        claim_a_bound(full, full, 10, 10, DESK, 2)


def test_claim_b():
    a, b = strays_instance()
    tr = run_process(a, b, DESK)
    res = claim_b_check(tr)
    assert 1 <= res.j <= DESK.s
    assert res.pigeonhole and res.flag
    sizes = [st.sumset_size for st in tr.steps]
    assert res.bound == pytest.approx((1 - np.exp(-DESK.c / 320 / 16)) ** 2 * 0.8 * sizes[res.j])


def test_claim_b_gates():
    tr = run_process(*random_pair(), DESK)
    assert tr.terminal == CASE1
    with pytest.raises(WrongTerminal):
        claim_b_check(tr)
    full = ZpSet.full(modp(31))
    done = run_process(full, full, DESK)
    stub = SimpleNamespace(s=1, K=DESK.K, alpha=DESK.alpha, c=DESK.c, epsilon=DESK.epsilon)
    with pytest.raises(HypothesisViolated):
        claim_b_check(done, stub)


def test_theorem2_check_and_determinism():
    a, b = strays_instance()
    tr = run_process(a, b, DESK)
    x = theorem2_check(tr, 30, make_rng(5))
    y = theorem2_check(tr, 30, make_rng(5))
    assert x.to_dict() == y.to_dict() and x.flag
    assert x.n * x.n >= DESK.c * max(len(a), len(b))
