"""Iterative popularity filtering with a greedy stand-in for the refinement step.

Each step splits A_i + B_i into popular sums C+ (r(x) >= alpha |B_i|) and
unpopular sums C-, tests the two early-stop rules exactly, and otherwise
shrinks A_i, B_i by at most an eps/s fraction. The shrink is a heuristic:
the existence result it replaces gives no construction, so each step records
whether the conclusion |A_{i+1}+B_{i+1}| <= |C+| + (eps/s) min held.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import HypothesisViolated, WrongCase, WrongTerminal
from .kernel import PopularityPartition, RestrictedPairSet, as_fraction, popularity_partition, sumset
from .rng import as_rng
from .witness import McEstimate, chernoff_terms, mc_expected_sumset
from .zp import ZpSet

CASE1 = "StoppedEarlyCase1"  # |C+| > 10K min(|A_i|, |B_i|)
CASE2 = "StoppedEarlyCase2"  # |Gamma| < (1 - delta)|A_i||B_i|
COMPLETED = "RanToCompletion"
TERMINALS = (CASE1, CASE2, COMPLETED)


@dataclass(frozen=True)
class ProcessParams:
    epsilon: Fraction
    K: Fraction
    delta: Fraction = Fraction(1, 10)
    c: int | None = None  # defaults to the smallest admissible value

    def __post_init__(self):
        for name in ("epsilon", "K", "delta"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.K <= 1:
            raise ValueError("K must exceed 1")
        if not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")
        if self.s < 1:
            raise ValueError("s = floor(50K/epsilon) must be >= 1")
        lo = self.c_min
        if self.c is None:
            object.__setattr__(self, "c", lo)
        elif self.c < lo:
            raise ValueError(f"c = {self.c} below the required {lo}")

    @property
    def s(self) -> int:
        return math.floor(50 * self.K / self.epsilon)

    @property
    def alpha(self) -> Fraction:
        return self.delta / (16 * self.K)

    @property
    def c_min(self) -> int:
        a = float(2**10 * self.K / self.delta)
        b = 2**10 * abs(math.log(self.epsilon)) / float(self.alpha)
        return math.ceil(max(a, b))

    @property
    def shrink(self) -> Fraction:
        return self.epsilon / self.s

    def to_dict(self) -> dict:
        return {"epsilon": str(self.epsilon), "K": str(self.K), "delta": str(self.delta),
                "s": self.s, "alpha": str(self.alpha), "c": self.c}


@dataclass(frozen=True)
class ProcessStep:
    index: int
    a: ZpSet
    b: ZpSet
    gamma: int  # |Gamma_i|
    gamma_c: int  # |Gamma_i^c|
    c_plus: int
    c_minus: int
    sumset_size: int
    rep_total: int  # sum_x r_i(x)
    case1: bool
    case2: bool
    stop_reason: str | None = None
    shao_held: bool | None = None  # conclusion of the refinement leading to step i+1
    removed: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {"index": self.index, "size_a": len(self.a), "size_b": len(self.b),
                "gamma": self.gamma, "gamma_c": self.gamma_c, "c_plus": self.c_plus, "c_minus": self.c_minus,
                "sumset_size": self.sumset_size, "rep_total": self.rep_total,
                "case1": self.case1, "case2": self.case2, "stop_reason": self.stop_reason,
                "shao_held": self.shao_held, "removed": list(self.removed),
                "a": list(self.a.elements()), "b": list(self.b.elements())}


@dataclass(frozen=True)
class ProcessTrace:
    steps: tuple[ProcessStep, ...]
    terminal: str
    params: ProcessParams
    stationary: bool = False  # refinement stopped changing the sets; later steps would repeat
    seed: int | None = None

    @property
    def last(self) -> ProcessStep:
        return self.steps[-1]

    def shao_rate(self) -> float | None:
        flags = [st.shao_held for st in self.steps if st.shao_held is not None]
        return float(np.mean(flags)) if flags else None

    def to_dict(self) -> dict:
        return {"terminal": self.terminal, "stationary": self.stationary, "steps": len(self.steps),
                "params": self.params.to_dict(), "shao_rate": self.shao_rate()}


def _stop_rules(part: PopularityPartition, na: int, nb: int, params: ProcessParams) -> tuple[bool, bool]:
    case1 = len(part.popular) > params.K * min(na, nb) * 10
    case2 = part.gamma_count < (1 - params.delta) * na * nb
    return case1, case2


def _pair_matrix(gamma: RestrictedPairSet) -> np.ndarray:
    """Boolean |A| x |B| matrix of admitted pairs (rows and columns in ascending order)."""
    a, b = gamma.a, gamma.b
    cols = b.array()
    m = np.zeros((len(a), len(cols)), dtype=bool)
    for i, x in enumerate(a.elements()):
        row = gamma.rows.get(x, 0)
        if row:
            m[i] = ZpSet(a.ctx, row).indicator()[cols]
    return m


def shao_surrogate(a: ZpSet, b: ZpSet, gamma: RestrictedPairSet, shrink_budget) -> tuple[ZpSet, ZpSet]:
    """Drop the elements with the most unpopular incidences.

    Removes up to floor(shrink_budget |A|) elements of A and floor(shrink_budget |B|)
    of B, highest count of pairs outside Gamma first (smaller element on ties),
    never removing an element with no such pair. Counts are taken once against
    the incoming Gamma.
    """
    shrink_budget = as_fraction(shrink_budget)
    admitted = _pair_matrix(gamma)
    out = []
    for s, bad in ((a, (~admitted).sum(axis=1)), (b, (~admitted).sum(axis=0))):
        quota = math.floor(shrink_budget * len(s))
        arr = s.array()
        order = np.lexsort((arr, -bad))  # most incidences first, then ascending element
        drop = [int(arr[i]) for i in order[:quota] if bad[i] > 0]
        out.append(s - ZpSet.from_array(s.ctx, np.sort(np.asarray(drop, dtype=np.int64))) if drop else s)
    return out[0], out[1]


def run_process(a: ZpSet, b: ZpSet, params: ProcessParams, rng=None) -> ProcessTrace:
    """Run the filtering process to an early stop or to step s.

    The refinement is deterministic; ``rng`` is accepted for interface
    uniformity and only its seed is recorded.
    """
    if not a or not b:
        raise ValueError("A and B must be non-empty")
    _, seed = as_rng(rng)
    steps: list[ProcessStep] = []
    cur_a, cur_b = a, b
    for i in range(params.s + 1):
        part = popularity_partition(cur_a, cur_b, params.alpha)
        na, nb = len(cur_a), len(cur_b)
        case1, case2 = _stop_rules(part, na, nb, params)
        total = na * nb
        common = dict(index=i, a=cur_a, b=cur_b, gamma=part.gamma_count, gamma_c=total - part.gamma_count,
                      c_plus=len(part.popular), c_minus=len(part.unpopular),
                      sumset_size=len(part.popular) + len(part.unpopular),
                      rep_total=int(part.profile.counts.sum()), case1=case1, case2=case2)
        if i == params.s:
            steps.append(ProcessStep(**common))
            return ProcessTrace(tuple(steps), COMPLETED, params, False, seed)
        if case1 or case2:
            reason = CASE1 if case1 else CASE2
            steps.append(ProcessStep(**common, stop_reason=reason))
            return ProcessTrace(tuple(steps), reason, params, False, seed)
        nxt_a, nxt_b = shao_surrogate(cur_a, cur_b, part.gamma, params.shrink)
        held = len(sumset(nxt_a, nxt_b)) <= len(part.popular) + params.shrink * min(na, nb)
        removed = (na - len(nxt_a), nb - len(nxt_b))
        steps.append(ProcessStep(**common, shao_held=held, removed=removed))
        if removed == (0, 0):
            # a fixed point: every later step would repeat this one
            return ProcessTrace(tuple(steps), COMPLETED, params, True, seed)
        cur_a, cur_b = nxt_a, nxt_b
    raise AssertionError("unreachable")


def check_trace_invariants(trace: ProcessTrace) -> dict:
    """Exact checks: monotone shrinkage, per-step size floors, Gamma split and sum of r."""
    shrink = trace.params.shrink
    mono = floors = split = reps = True
    for prev, cur in zip(trace.steps, trace.steps[1:]):
        mono &= cur.a <= prev.a and cur.b <= prev.b
        floors &= len(cur.a) >= (1 - shrink) * len(prev.a) and len(cur.b) >= (1 - shrink) * len(prev.b)
    for st in trace.steps:
        total = len(st.a) * len(st.b)
        split &= st.gamma + st.gamma_c == total
        reps &= st.rep_total == total
    return {"monotone": bool(mono), "size_floors": bool(floors), "gamma_split": bool(split), "rep_sum": bool(reps)}


def theorem2_budget(params: ProcessParams, size: int) -> int:
    """n_A = n_B = ceil(sqrt(c * size)), so that n_A n_B >= c * size."""
    return math.isqrt(params.c * size - 1) + 1


def claim_a_bound(a_j: ZpSet, b_j: ZpSet, n_a: int, n_b: int, params: ProcessParams, case: int) -> float:
    """Chernoff-chain value behind an early stop at (A_j, B_j).

    Case 1 sums the per-x bound over C+ only; compare with 5K min(|A_j|,|B_j|).
    Case 2 evaluates the D-/D+ split line; compare with K|A_j|.
    """
    if case not in (1, 2):
        raise ValueError("case must be 1 or 2")
    part = popularity_partition(a_j, b_j, params.alpha)
    na, nb = len(a_j), len(b_j)
    if case == 1 and not part.popular:
        return 0.0
    case1, case2 = _stop_rules(part, na, nb, params)
    if not (case1 if case == 1 else case2):
        raise WrongCase(f"stop rule for case {case} does not fire (case1={case1}, case2={case2})")
    r_all = part.profile.counts
    if case == 1:
        r = r_all[part.popular.array()]
        return float(chernoff_terms(r, na, nb, n_a, n_b).sum())
    r = r_all[r_all > 0].astype(np.float64)
    low = n_b * r <= 2 * nb
    first = -np.expm1(-n_b * r[low] / (16 * nb)) * -np.expm1(-n_a / (4 * na))
    second = 0.5 * -np.expm1(-n_a * n_b * r[~low] / (8 * na * nb))
    return float(first.sum() + second.sum())


@dataclass(frozen=True)
class ClaimB:
    j: int
    bound: float
    flag: bool
    pigeonhole: bool  # the drop inequality held at j

    def to_dict(self) -> dict:
        return {"j": self.j, "bound": self.bound, "flag": self.flag, "pigeonhole": self.pigeonhole}


def claim_b_check(trace: ProcessTrace, params: ProcessParams | None = None) -> ClaimB:
    """Index j with |A_{j+1}+B_{j+1}| >= |A_j+B_j| - 11K/(s-1) min(|A|,|B|), and the final bound.

    The bound is (1 - exp(-alpha c/16))^2 (1 - 20K/s) |A_j+B_j|; the flag says
    whether it reaches (1 - eps)|A_j+B_j|. A stationary trace is extended by
    repeating its last step. When no index satisfies the drop inequality
    (possible if the refinement overshoots), the smallest drop is used and
    ``pigeonhole`` is False.
    """
    params = params or trace.params
    if trace.terminal != COMPLETED:
        raise WrongTerminal(f"trace ended with {trace.terminal}")
    s = params.s
    if s < 2:
        raise HypothesisViolated("s = 1 leaves no room for the s - 1 pigeonhole")
    sizes = [st.sumset_size for st in trace.steps]
    sizes += [sizes[-1]] * (s + 1 - len(sizes))
    first = trace.steps[0]
    slack = params.K * 11 * min(len(first.a), len(first.b)) / Fraction(s - 1)
    drops = [sizes[j] - sizes[j + 1] for j in range(1, s)]
    ok = [j for j in range(1, s) if sizes[j + 1] >= sizes[j] - slack]
    if ok:
        j, hole = ok[0], True
    else:
        j, hole = 1 + int(np.argmin(drops)), False
    size_j = sizes[j]
    factor = (-math.expm1(-float(params.alpha) * params.c / 16)) ** 2 * float(1 - 20 * params.K / s)
    bound = factor * size_j
    return ClaimB(j, bound, bound >= float(1 - params.epsilon) * size_j, hole)


def designated_step(trace: ProcessTrace) -> ProcessStep:
    """The step whose pair the argument hands back: the stop step, or the drop index from claim_b_check."""
    if trace.terminal != COMPLETED:
        return trace.last
    if trace.params.s < 2:
        return trace.last
    j = claim_b_check(trace).j
    return trace.steps[min(j, len(trace.steps) - 1)]


@dataclass(frozen=True)
class Theorem2Check:
    step: int
    estimate: McEstimate
    target: float
    flag: bool
    n: int

    def to_dict(self) -> dict:
        return {"step": self.step, "mean": self.estimate.mean, "std_error": self.estimate.std_error,
                "trials": self.estimate.trials, "target": self.target, "flag": self.flag, "n": self.n}


def theorem2_check(trace: ProcessTrace, trials: int = 200, rng=None) -> Theorem2Check:
    """MC over n independent points per side from the designated (A_j, B_j).

    n = ceil(sqrt(c max(|A|,|B|))) with the original sizes; the flag compares
    mean + 3 SE with min((1-eps)|A_j+B_j|, K|A_j|, K|B_j|).
    """
    params = trace.params
    st = designated_step(trace)
    first = trace.steps[0]
    n = theorem2_budget(params, max(len(first.a), len(first.b)))
    est = mc_expected_sumset(st.a, st.b, (n, n), trials, rng, mode="points")
    target = min((1 - params.epsilon) * st.sumset_size, params.K * len(st.a), params.K * len(st.b))
    return Theorem2Check(st.index, est, float(target), est.upper() >= target, n)
