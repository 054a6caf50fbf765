"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also gathered into the pytest terminal summary (see conftest).
Oracles are literal double loops or enumerations, never the kernel itself.
"""

import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from sumset_lab.cli import main as cli_main
from sumset_lab.constructions import (
    ConstructionParams,
    check_stickout_hypotheses,
    lemma10_families,
    lemma7_surgery,
    lemma_fg_expectation_check,
    stickout_search,
    thm5_construct,
    verify_families,
)
from sumset_lab.errors import StickoutNotFound
from sumset_lab.experiments import ExperimentConfig, run_experiment
from sumset_lab.kernel import RestrictedPairSet, rep_profile, restricted_sumset, sumset
from sumset_lab.process import (
    CASE1,
    CASE2,
    COMPLETED,
    ProcessParams,
    check_trace_invariants,
    run_process,
    theorem2_check,
)
from sumset_lab.rng import shard_rng
from sumset_lab.witness import (
    chernoff_lower_bound,
    find_witness_exhaustive,
    find_witness_random,
    mc_expected_sumset,
    witness_frontier,
)
from sumset_lab.zp import IntervalZp, ZpSet, dilate, interval, is_prime, modp, set_from_elements, translate

from conftest import naive_rep

RESULTS: list[str] = []


def record(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {title} | {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def rand_set(rng, p, lo=1, hi=None):
    k = int(rng.integers(lo, (p if hi is None else hi) + 1))
    return ZpSet.from_array(modp(p), np.sort(rng.choice(p, k, replace=False)))


PRIMES_5_101 = [q for q in range(5, 102) if is_prime(q)]


# --- 1. kernel vs double loop ---------------------------------------------------------------

def test_c01_kernel_oracle():
    t0 = time.perf_counter()
    bad = 0
    for i in range(500):
        rng = shard_rng(1, i)
        p = int(rng.choice(PRIMES_5_101))
        a, b = rand_set(rng, p, 0), rand_set(rng, p, 0)
        pairs = [(x, y) for x in a.elements() for y in b.elements() if rng.random() < 0.5]
        gamma = RestrictedPairSet.from_pairs(a, b, pairs)
        naive_sum = sorted({(x + y) % p for x in a.elements() for y in b.elements()})
        naive_restricted = sorted({(x + y) % p for x, y in pairs})
        bad += list(sumset(a, b).elements()) != naive_sum
        bad += list(restricted_sumset(a, b, gamma).elements()) != naive_restricted
        bad += rep_profile(a, b).as_dict() != naive_rep(a, b)
    dt = time.perf_counter() - t0
    record(1, "kernel oracle equivalence", bad == 0 and dt < 10, f"500 instances, {bad} mismatches, {dt:.1f}s")


# --- 2. Cauchy-Davenport --------------------------------------------------------------------

def test_c02_cauchy_davenport():
    t0 = time.perf_counter()
    bad = total = 0
    for p in [q for q in range(5, 32) if is_prime(q)]:
        for i in range(1000):
            rng = shard_rng(2, p, i)
            a, b = rand_set(rng, p), rand_set(rng, p)
            bad += len(sumset(a, b)) < min(p, len(a) + len(b) - 1)
            total += 1
    dt = time.perf_counter() - t0
    record(2, "Cauchy-Davenport", bad == 0 and dt < 10, f"{total} pairs, {bad} violations, {dt:.1f}s")


# --- 3. Chernoff lower bound vs Monte Carlo -------------------------------------------------

def test_c03_chernoff_soundness():
    t0 = time.perf_counter()
    bad = 0
    primes = [q for q in range(5, 62) if is_prime(q)]
    for i in range(200):
        rng = shard_rng(3, i)
        p = int(rng.choice(primes))
        a, b = rand_set(rng, p), rand_set(rng, p)
        n_a, n_b = int(rng.integers(1, 2 * len(a) + 1)), int(rng.integers(1, 2 * len(b) + 1))
        est = mc_expected_sumset(a, b, (n_a, n_b), 10_000, rng, mode="points")
        bad += chernoff_lower_bound(a, b, n_a, n_b) > est.mean + 3 * est.std_error
    dt = time.perf_counter() - t0
    record(3, "Chernoff bound soundness", bad == 0 and dt < 300,
           f"200 instances x 1e4 trials, {bad} violations, {dt:.1f}s")


# --- 4, 5. near-interval fibre construction -------------------------------------------------

def _holey_instances():
    """20 instances per n: X, Y inside [0, n) of Z_p, each missing floor(0.05 n) interior points."""
    out = []
    for n in (100, 200, 400):
        p = 2 * n + 1
        while not is_prime(p):
            p += 1
        ctx = modp(p)
        for i in range(20):
            rng = shard_rng(45, n, i)
            sets = []
            for _ in range(2):
                keep = np.ones(n, dtype=bool)
                keep[1 + rng.choice(n - 2, n // 20, replace=False)] = False
                sets.append(ZpSet.from_array(ctx, np.flatnonzero(keep)))
            c = math.ceil(4 * math.sqrt(n))
            out.append((sets[0], sets[1], IntervalZp(ctx, 0, n), (c, c), (n, i)))
    return out


@pytest.fixture(scope="module")
def holey():
    return _holey_instances()


def test_c04_fg_expectation(holey):
    t0 = time.perf_counter()
    flags, fibre_ok = [], []
    lhs = rhs = 0.0
    for x, y, iv, budget, key in holey:
        chk = lemma_fg_expectation_check(x, y, iv, iv, budget, ConstructionParams(k=4), 1000, shard_rng(4, *key))
        flags.append(chk.flag)
        fibre_ok.extend(chk.fibre_ok.tolist())
        lhs += float((chk.fibre_mean + 3 * chk.fibre_se).sum())
        rhs += float(chk.fibre_bound.sum())
    rate, frate = float(np.mean(flags)), float(np.mean(fibre_ok))
    dt = time.perf_counter() - t0
    ok = rate >= 0.95 and lhs >= rhs and frate >= 0.95 and dt < 300
    record(4, "fibre family expectation", ok,
           f"flag rate {rate:.3f} over {len(flags)}; fibres ok {frate:.3f}, "
           f"sum(mean+3SE) {lhs:.0f} >= sum bound {rhs:.0f}; {dt:.1f}s")


def test_c05_thm5_end_to_end(holey):
    t0 = time.perf_counter()
    wins = []
    for x, y, iv, budget, key in holey:
        w = thm5_construct(x, y, iv, iv, budget, ConstructionParams(k=4), shard_rng(5, *key)).witness
        wins.append(len(w.a_sub) <= budget[0] and len(w.b_sub) <= budget[1] and w.a_sub <= x and w.b_sub <= y
                    and len(sumset(w.a_sub, w.b_sub)) >= len(x) + len(y) - 1)
    rate = float(np.mean(wins))
    dt = time.perf_counter() - t0
    record(5, "near-interval witness end to end", rate >= 0.95 and dt < 300,
           f"success {rate:.3f} over {len(wins)} (kernel-verified), {dt:.1f}s")


# --- 6. exhaustive witness oracle -----------------------------------------------------------

def _enumerated_frontier(a, target):
    p = a.ctx.modulus
    n = len(a)
    el = a.elements()
    ok = np.zeros((n + 1, n + 1), dtype=bool)
    for c1 in range(1, n + 1):
        for c2 in range(1, n + 1):
            ok[c1, c2] = any(len({(u + v) % p for u in xa for v in yb}) >= target
                             for xa in itertools.combinations(el, c1) for yb in itertools.combinations(el, c2))
    return [(c1, c2) for c1 in range(1, n + 1) for c2 in range(1, n + 1)
            if ok[c1, c2] and not ok[c1 - 1, c2] and not ok[c1, c2 - 1]]


def test_c06_exhaustive_oracle():
    t0 = time.perf_counter()
    ctx = modp(31)
    instances = [interval(ctx, 0, n) for n in range(1, 7)]
    for seed in range(20):
        rng = shard_rng(6, seed)
        instances += [ZpSet.from_array(ctx, np.sort(rng.choice(31, n, replace=False))) for n in range(1, 7)]
    mismatch = nonmono = false_pos = 0
    for i, a in enumerate(instances):
        target = min(31, 2 * len(a) - 1)
        front = [(f.c1, f.c2) for f in witness_frontier(a, a, target)]
        mismatch += front != _enumerated_frontier(a, target)
        nonmono += any(not (u[0] < v[0] and u[1] > v[1]) for u, v in zip(front, front[1:]))
        for c1, c2 in itertools.product(range(1, len(a) + 1), repeat=2):
            if find_witness_exhaustive(a, a, (c1, c2), target) is None:
                false_pos += find_witness_random(a, a, (c1, c2), target, 50, shard_rng(6, i, c1, c2)) is not None
    dt = time.perf_counter() - t0
    ok = mismatch == nonmono == false_pos == 0 and dt < 600
    record(6, "exhaustive witness oracle", ok,
           f"{len(instances)} instances; frontier mismatches {mismatch}, non-monotone {nonmono}, "
           f"random-beats-exhaustive {false_pos}; {dt:.1f}s")


# --- 7. pipeline at desk scale --------------------------------------------------------------

def test_c07_pipeline_desk_scale():
    t0 = time.perf_counter()
    grid = (1.0, 2.0, 3.0, 4.0, 6.0, 8.0)
    cmins, missing = [], []
    for family in ("interval", "random"):
        for p, ns in ((101, (9, 25, 33)), (211, (9, 25, 49, 70))):
            cfg = ExperimentConfig("c7", "pipeline", family, (p,), ns, seed=7, C=grid, seeds=20,
                                   params={"alpha": 0.5, "beta": 0.2})
            rec = run_experiment(cfg)
            assert all(r["achieved"] is None or r["achieved"] >= 2 * r["n"] - 1 or not r["found"] for r in rec.rows)
            for n in ns:
                c_min = next(r["C_min"] for r in rec.summary if r["n"] == n)
                cmins.append(f"{family[0]}{p}/{n}:{c_min}")
                if c_min is None:
                    missing.append((family, p, n))
    dt = time.perf_counter() - t0
    record(7, "pipeline desk scale", not missing and dt < 900,
           f"empirical C_min per family/p/n {' '.join(cmins)}; cells without C<=8: {missing}; {dt:.1f}s")


# --- 8. stickout ----------------------------------------------------------------------------

def test_c08_stickout():
    t0 = time.perf_counter()
    primes = [q for q in range(211, 1010) if is_prime(q)]
    wins = 0
    for i in range(200):
        rng = shard_rng(8, i)
        p = int(rng.choice(primes))
        ny = int(rng.integers(p // 8, (p - 1) // 2 + 1))
        nx, nz = int(rng.integers(1, ny // 8 + 1)), int(rng.integers(0, ny // 8 + 1))
        y, x = rand_set(rng, p, ny, ny), rand_set(rng, p, nx, nx)
        z = ZpSet.from_array(modp(p), np.sort(rng.choice(p, nz, replace=False)))
        c1 = int(rng.integers(max(1, -(-16 * nx // ny)), nx + 1))
        c2 = -(-16 * nx // c1)
        check_stickout_hypotheses(x, y, z, (c1, c2))
        try:
            res = stickout_search(x, y, z, (c1, c2), rng, max_restarts=100)
        except StickoutNotFound:
            continue
        wins += res.x_sub <= x and res.y_sub <= y and len(sumset(res.x_sub, res.y_sub) - z) >= 2 * nx
    dt = time.perf_counter() - t0
    record(8, "stickout", wins / 200 >= 0.99 and dt < 120, f"{wins}/200 within 100 restarts, {dt:.1f}s")


# --- 9. interval surgery and outer families -------------------------------------------------

def _near_interval(ctx, iv, budget, rng):
    p = ctx.modulus
    ind = np.zeros(p, dtype=bool)
    ind[(iv.left + np.arange(len(iv))) % p] = True
    k = int(rng.integers(0, budget + 1))
    holes = int(rng.integers(0, k + 1))
    inside, outside = np.flatnonzero(ind), np.flatnonzero(~ind)
    ind[rng.choice(inside, holes, replace=False)] = False
    ind[rng.choice(outside, k - holes, replace=False)] = True
    return ZpSet.from_array(ctx, np.flatnonzero(ind))


def test_c09_surgery_and_families():
    t0 = time.perf_counter()
    primes = [q for q in range(1009, 2004) if is_prime(q)]
    beta, gamma, alpha = Fraction(1, 5), Fraction(1, 100), Fraction(1, 2)
    viol_s = viol_f = 0
    for i in range(50):
        rng = shard_rng(9, i)
        p = int(rng.choice(primes))
        ctx = modp(p)
        I = IntervalZp(ctx, int(rng.integers(p)), int(rng.integers(p // 4, p // 3)))
        J = IntervalZp(ctx, int(rng.integers(p)), int(rng.integers(p // 4, p // 3)))
        budget = int(gamma * min(len(I), len(J)))
        a, b = _near_interval(ctx, I, budget, rng), _near_interval(ctx, J, budget, rng)
        s = lemma7_surgery(a, b, I, J, beta, gamma)
        checks = list(s.invariants().values())
        for parts, ivs, whole in ((s.A_parts, s.I_parts, a), (s.B_parts, s.J_parts, b)):
            checks += [not (parts[u] & parts[v]) for u, v in ((0, 1), (0, 2), (1, 2))]
            checks += [parts[u] <= ivs[u].to_set() & whole for u in range(3)]
            checks += [not (ivs[u].to_set() & ivs[v].to_set()) for u, v in ((0, 1), (0, 2), (1, 2))]
        viol_s += not all(checks)
        fam = lemma10_families(s.I_parts, s.J_parts, alpha, beta, sets=(a, b))
        fchecks = list(verify_families(fam, s.I_parts, s.J_parts).values())
        mid = sumset(s.I_parts[1].to_set(), s.J_parts[1].to_set())
        fchecks += [not (sumset(u, t) & mid) for u, t in zip(fam.I0 + fam.J0, fam.J2 + fam.I2)]
        fchecks += [not (u & v) for fam_side in (fam.I0, fam.J0) for u, v in itertools.combinations(fam_side, 2)]
        viol_f += not all(fchecks)
    dt = time.perf_counter() - t0
    record(9, "surgery and families invariants", viol_s == viol_f == 0 and dt < 120,
           f"50 instances; surgery violations {viol_s}, families violations {viol_f}; {dt:.1f}s")


# --- 10. process traces ---------------------------------------------------------------------

DESK = ProcessParams(Fraction(1, 2), 2, Fraction(1, 10))


def _strays(rng, p=20011, n=400, k=15):
    ctx = modp(p)
    pick = lambda: rng.choice(np.arange(1000, p - 11), k, replace=False).tolist()
    return set_from_elements(ctx, list(range(n)) + pick()), set_from_elements(ctx, list(range(n)) + pick())


def _sidon_base(q=641):
    p = 4 * q * q + 1
    while not is_prime(p):
        p += 1
    return set_from_elements(modp(p), [2 * q * k + (k * k) % q for k in range(q)])


def _stop_arith_ok(trace) -> bool:
    params = trace.params
    for st in trace.steps:
        na, nb = len(st.a), len(st.b)
        sums = np.add.outer(st.a.array(), st.b.array()).ravel() % st.a.ctx.modulus
        _, r = np.unique(sums, return_counts=True)
        pop = r >= params.alpha * nb  # Fraction comparison, no rounding
        if (int(pop.sum()), int(r[pop].sum()), int(r.sum())) != (st.c_plus, st.gamma, st.rep_total):
            return False
        if st.rep_total != na * nb or st.c_minus != len(r) - st.c_plus:
            return False
        if st.case1 != (st.c_plus > 10 * params.K * min(na, nb)):
            return False
        if st.case2 != (st.gamma < (1 - params.delta) * na * nb):
            return False
    last = trace.steps[-1]
    return {CASE1: last.case1, CASE2: last.case2 and not last.case1,
            COMPLETED: not any(s.case1 or s.case2 for s in trace.steps)}[trace.terminal]


def test_c10_process_traces():
    t0 = time.perf_counter()
    sidon = _sidon_base()
    p_sidon = sidon.ctx.modulus
    flags, inv_bad, terminals = [], 0, {}
    for i in range(100):
        rng = shard_rng(10, i)
        trials = 200
        if i % 25 == 24:
            # large Sidon-type sets: every sum has r <= 2 < alpha |B|, so Case 2 fires at once
            a = translate(dilate(sidon, int(rng.integers(1, p_sidon))), int(rng.integers(p_sidon)))
            b, trials = a, 10
        elif i % 2 == 0:
            a, b = _strays(rng)
        else:
            a, b = (rand_set(rng, 20011, 30, 30) for _ in range(2))
        tr = run_process(a, b, DESK)
        inv = check_trace_invariants(tr)
        inv_bad += not (all(inv.values()) and _stop_arith_ok(tr))
        terminals[tr.terminal] = terminals.get(tr.terminal, 0) + 1
        flags.append(theorem2_check(tr, trials, rng).flag)
    rate = float(np.mean(flags))
    dt = time.perf_counter() - t0
    record(10, "process trace invariants", inv_bad == 0 and rate >= 0.95 and dt < 600,
           f"100 runs {terminals}; invariant failures {inv_bad}; conclusion flag rate {rate:.3f}; {dt:.1f}s")


# --- 11. CLI determinism --------------------------------------------------------------------

def _cli_cases(tmp):
    a = ",".join(map(str, range(0, 40, 2)))
    line400 = tmp / "iv.txt"
    line400.write_text(",".join(map(str, range(100))))
    near = tmp / "near.txt"
    near.write_text(",".join(map(str, list(range(200, 400)) + [420])))
    cfg = tmp / "exp.toml"
    cfg.write_text('name = "det"\noperation = "estimate_constant"\nseed = 4\n'
                   '[generator]\nfamily = "random"\np = 31\nn = [4, 6]\n[sweep]\nC = [1.0, 2.0]\nseeds = 3\n')
    return {
        "kernel": ["kernel", "--p", "101", "--a", a, "--rep", "--alpha", "1/3", "--ap"],
        "witness": ["witness", "--p", "101", "--a", a, "--b", a, "--c1", "6", "--c2", "6", "--mc-trials", "50"],
        "frontier": ["frontier", "--p", "31", "--a", "0,1,2,3,5"],
        "construct": ["construct", "--p", "211", "--a", str(line400), "--b", str(line400), "--I", "0,100",
                      "--J", "0,100", "--c1", "40", "--c2", "40", "--fg-trials", "30"],
        "surgery": ["surgery", "--p", "1009", "--a", str(near), "--b", str(near), "--I", "200,200", "--J", "200,200",
                    "--beta", "2/5", "--gamma", "1/100"],
        "stickout": ["stickout", "--p", "101", "--a", "0,1", "--b", ",".join(map(str, range(0, 64, 2))),
                     "--z", "3,5", "--c1", "2", "--c2", "16"],
        "families": ["families", "--p", "1009", "--I-parts", "0,26;26,403;429,26",
                     "--J-parts", "505,26;531,403;934,26", "--alpha", "1/5", "--beta", "1/5"],
        "pipeline": ["pipeline", "--p", "211", "--a", a, "--b", a, "--c1", "10", "--c2", "10",
                     "--alpha", "1/2", "--beta", "1/5"],
        "process": ["process", "--p", "101", "--a", a, "--b", a, "--trials", "20"],
        "experiment run": ["experiment", "run", str(cfg)],
    }


def test_c11_cli_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    differ, codes = [], []
    for name, argv in _cli_cases(tmp_path).items():
        blobs = []
        for rep in ("x", "y"):
            out = tmp_path / f"{name.replace(' ', '_')}.{rep}"
            extra = ["--out", str(out)]
            if name == "process":
                extra += ["--trace", str(out) + ".trace"]
            if name == "experiment run":
                out.mkdir()
            for fmt in ("json", "csv"):
                codes.append(cli_main(argv + extra + ["--seed", "11", "--format", fmt]))
                if name != "experiment run":
                    blobs.append(out.read_bytes() + (b"" if name != "process" else
                                                     (tmp_path / f"{out.name}.trace").read_bytes()))
            if name == "experiment run":
                blobs += [f.read_bytes() for f in sorted(out.iterdir())]
                rows = next(out.glob("*.rows.jsonl"))
                capsys.readouterr()
                codes.append(cli_main(["experiment", "report", str(rows)]))
                blobs.append(json.dumps(json.loads(capsys.readouterr().out)).encode())
        half = len(blobs) // 2
        if blobs[:half] != blobs[half:]:
            differ.append(name)
    capsys.readouterr()
    dt = time.perf_counter() - t0
    record(11, "CLI determinism", not differ and set(codes) == {0} and dt < 60,
           f"{len(_cli_cases(tmp_path))} subcommand runs (+report) x 2 formats; differing: {differ}; "
           f"exit codes {sorted(set(codes))}; {dt:.1f}s")
