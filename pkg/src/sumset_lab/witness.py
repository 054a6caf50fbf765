"""Searches for small witness pairs (A', B') and expectation estimates for |A'+B'|.

Two sampling modes appear throughout:

``"subset"``  a uniformly random c-element subset (every c-set equally likely);
``"points"``  c independent uniform draws with repetition, so |A'| <= c.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BudgetExceedsSet, CapExceeded, ContextMismatch, PreconditionGap
from .kernel import rep_profile, sumset
from .rng import as_rng
from .zp import ZpSet

EXHAUSTIVE_CAP = 10**8
SAMPLING_MODES = ("points", "subset")


@dataclass(frozen=True)
class Budget:
    c1: int
    c2: int

    def check(self, a: ZpSet, b: ZpSet) -> "Budget":
        if not (1 <= self.c1 <= len(a)) or not (1 <= self.c2 <= len(b)):
            raise BudgetExceedsSet(f"budget ({self.c1}, {self.c2}) outside [1,{len(a)}] x [1,{len(b)}]")
        return self

    def __iter__(self):
        return iter((self.c1, self.c2))


def _budget(budget) -> Budget:
    return budget if isinstance(budget, Budget) else Budget(*map(int, budget))


@dataclass(frozen=True)
class WitnessResult:
    a_sub: ZpSet
    b_sub: ZpSet
    achieved: int
    target: int
    tries_used: int = 0
    seed: int | None = None

    @property
    def found(self) -> bool:
        return self.achieved >= self.target

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "a_sub": list(self.a_sub.elements()),
            "b_sub": list(self.b_sub.elements()),
            "achieved": self.achieved,
            "target": self.target,
            "tries_used": self.tries_used,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int | None = None
    mode: str = "points"
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def upper(self, k: float = 3.0) -> float:
        return self.mean + k * self.std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        return d


def estimate_from_samples(values, seed=None, mode="points") -> McEstimate:
    """Mean and plug-in standard error (population std / sqrt(n))."""
    vals = np.asarray(values, dtype=np.float64)
    n = len(vals)
    if n < 1:
        raise ValueError("need at least one trial")
    return McEstimate(float(vals.mean()), float(vals.std() / math.sqrt(n)), n, seed, mode, vals)


def sample_c_subset(s: ZpSet, c: int, rng) -> ZpSet:
    """Uniform c-element subset of ``s``."""
    rng, _ = as_rng(rng)
    if not (1 <= c <= len(s)):
        raise BudgetExceedsSet(f"cannot draw {c} of {len(s)} elements")
    return ZpSet.from_array(s.ctx, np.sort(rng.choice(s.array(), size=c, replace=False)))


def sample_points(s: ZpSet, c: int, rng) -> ZpSet:
    """c independent uniform draws from ``s`` (duplicates collapse)."""
    rng, _ = as_rng(rng)
    if c < 1 or not s:
        raise BudgetExceedsSet(f"cannot draw {c} points from {len(s)} elements")
    return ZpSet.from_array(s.ctx, np.unique(rng.choice(s.array(), size=c, replace=True)))


def _draw_batch(arr: np.ndarray, c: int, trials: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    """(trials, c) matrix of drawn elements."""
    if mode == "points":
        return arr[rng.integers(0, len(arr), size=(trials, c))]
    keys = rng.random((trials, len(arr)))
    return arr[np.argpartition(keys, c - 1, axis=1)[:, :c]] if c < len(arr) else np.tile(arr, (trials, 1))


def batch_sumset_sizes(ctx, rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
    """|A'_t + B'_t| for each row t, via FFT convolution of indicator rows.

    Independent of the bitset kernel; counts are small integers so the 0.5
    threshold on the real convolution is exact.
    """
    trials = rows_a.shape[0]
    n = ctx.modulus
    fft_len = n if ctx.is_modp else 2 * n
    out = np.empty(trials, dtype=np.int64)
    step = max(1, (1 << 22) // fft_len)
    for lo in range(0, trials, step):
        ra, rb = rows_a[lo:lo + step], rows_b[lo:lo + step]
        t = ra.shape[0]
        ia = np.zeros((t, fft_len))
        ib = np.zeros((t, fft_len))
        ia[np.arange(t)[:, None], ra] = 1.0
        ib[np.arange(t)[:, None], rb] = 1.0
        conv = np.fft.irfft(np.fft.rfft(ia, axis=1) * np.fft.rfft(ib, axis=1), n=fft_len, axis=1)
        out[lo:lo + step] = (conv > 0.5).sum(axis=1)
    return out


def mc_expected_sumset(a: ZpSet, b: ZpSet, budget, trials: int, rng=None, mode: str = "points") -> McEstimate:
    """Monte Carlo estimate of E|A'+B'| for random A' (c1 draws) and B' (c2 draws)."""
    if a.ctx != b.ctx:
        raise ContextMismatch(f"{a.ctx} vs {b.ctx}")
    if mode not in SAMPLING_MODES:
        raise ValueError(f"mode must be one of {SAMPLING_MODES}")
    rng, seed = as_rng(rng)
    c1, c2 = _budget(budget)
    if mode == "subset":
        Budget(c1, c2).check(a, b)
    elif c1 < 1 or c2 < 1 or not a or not b:
        raise BudgetExceedsSet("point sampling needs c >= 1 and non-empty sets")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows_a = _draw_batch(a.array(), c1, trials, mode, rng)
    rows_b = _draw_batch(b.array(), c2, trials, mode, rng)
    return estimate_from_samples(batch_sumset_sizes(a.ctx, rows_a, rows_b), seed, mode)


def chernoff_terms(counts: np.ndarray, size_a: int, size_b: int, n_a: float, n_b: float) -> np.ndarray:
    """Per-x summand of the Chernoff lower bound on P(x in A'+B'), for r(x) > 0."""
    r = np.asarray(counts, dtype=np.float64)
    first = -np.expm1(-n_b * r / (16.0 * size_b))
    second = -np.expm1(-np.maximum(n_a / (4.0 * size_a), n_a * n_b * r / (8.0 * size_a * size_b)))
    return first * second


def chernoff_lower_bound(a: ZpSet, b: ZpSet, n_a: int, n_b: int) -> float:
    """Lower bound on E|A'+B'| for n_a, n_b independent uniform points.

    Sum over x in A+B of (1 - exp(-n_b r/(16|B|))) * (1 - exp(-max(n_a/(4|A|), n_a n_b r/(8|A||B|)))).
    """
    if n_a < 1 or n_b < 1 or not a or not b:
        raise ValueError("need n_a, n_b >= 1 and non-empty sets")
    prof = rep_profile(a, b)
    r = prof.counts[prof.counts > 0]
    return float(chernoff_terms(r, len(a), len(b), n_a, n_b).sum())


def find_witness_random(a: ZpSet, b: ZpSet, budget, target: int, max_tries: int, rng=None) -> WitnessResult | None:
    """Sample uniform (c1, c2)-subset pairs until |A'+B'| >= target; None if the tries run out."""
    if target < 1:
        raise ValueError("target must be >= 1")
    rng, seed = as_rng(rng)
    c1, c2 = _budget(budget).check(a, b)
    arr_a, arr_b = a.array(), b.array()
    for tries in range(1, max_tries + 1):
        sub_a = ZpSet.from_array(a.ctx, np.sort(rng.choice(arr_a, size=c1, replace=False)))
        sub_b = ZpSet.from_array(b.ctx, np.sort(rng.choice(arr_b, size=c2, replace=False)))
        got = len(sumset(sub_a, sub_b))
        if got >= target:
            return WitnessResult(sub_a, sub_b, got, target, tries, seed)
    return None


def _subset_count(n: int, k: int) -> int:
    return math.comb(n, k)


def find_witness_exhaustive(a: ZpSet, b: ZpSet, budget, target: int, cap: int = EXHAUSTIVE_CAP) -> WitnessResult | None:
    """Lexicographically first (A', B') of sizes exactly (c1, c2) with |A'+B'| >= target.

    Larger witnesses never hurt, so exact sizes lose nothing. ``None`` is an
    exhaustive certificate that no witness exists within the budget.
    """
    c1, c2 = _budget(budget).check(a, b)
    total = _subset_count(len(a), c1) * _subset_count(len(b), c2)
    if total > cap:
        raise CapExceeded(f"{total} pair evaluations exceed cap {cap}")
    if min(c1 * c2, len(sumset(a, b))) < target:
        return None
    ctx = a.ctx
    b_elems = b.elements()
    evaluated = 0
    for combo_a in itertools.combinations(a.elements(), c1):
        sub_a = ZpSet.from_array(ctx, combo_a)
        if len(sumset(sub_a, b)) < target:
            continue
        for combo_b in itertools.combinations(b_elems, c2):
            evaluated += 1
            sub_b = ZpSet.from_array(ctx, combo_b)
            got = len(sumset(sub_a, sub_b))
            if got >= target:
                return WitnessResult(sub_a, sub_b, got, target, evaluated, None)
    return None


def witness_grid(a: ZpSet, b: ZpSet, target: int, cap: int = EXHAUSTIVE_CAP) -> np.ndarray:
    """exists[c1-1, c2-1]: whether some exact-size pair reaches ``target``."""
    grid = np.zeros((len(a), len(b)), dtype=bool)
    for c1 in range(1, len(a) + 1):
        for c2 in range(1, len(b) + 1):
            grid[c1 - 1, c2 - 1] = find_witness_exhaustive(a, b, (c1, c2), target, cap) is not None
    return grid


def witness_frontier(a: ZpSet, b: ZpSet, target: int, cap: int = EXHAUSTIVE_CAP) -> list[Budget]:
    """Pareto-minimal budgets admitting a witness, ordered by c1."""
    frontier: list[Budget] = []
    best_c2 = len(b) + 1
    for c1 in range(1, len(a) + 1):
        for c2 in range(1, best_c2):
            if find_witness_exhaustive(a, b, (c1, c2), target, cap) is not None:
                frontier.append(Budget(c1, c2))
                best_c2 = c2
                break
    return frontier


def _gain(ctx, current: int, shifts_of: ZpSet, base_bits: int, x: int) -> int:
    """Number of new sums contributed by adding x (sums x + base) to ``current``."""
    if ctx.is_modp:
        shifted = ((base_bits << x) | (base_bits >> (ctx.modulus - x))) & ctx.mask
    else:
        shifted = base_bits << x
    return (shifted & ~current).bit_count()


def augment_witness(a: ZpSet, b: ZpSet, partial: WitnessResult, d: int, target: int,
                    strict: bool = True) -> WitnessResult:
    """Greedily add at most d points to each side, each maximising the new-sum count.

    Stops as soon as ``target`` is reached or no candidate adds a sum.
    Ties go to the A side, then the smaller element. With ``strict=False`` a
    partial result further than d from the target is still topped up
    (best effort) instead of raising.
    """
    if strict and partial.achieved < target - d:
        raise PreconditionGap(f"achieved {partial.achieved} < target {target} - d {d}")
    if d < 0:
        raise ValueError("d must be >= 0")
    ctx = a.ctx
    sub_a, sub_b = partial.a_sub, partial.b_sub
    current = sumset(sub_a, sub_b).bits
    added_a = added_b = 0
    while current.bit_count() < target and (added_a < d or added_b < d):
        best = (0, None, None)
        if added_a < d:
            for x in (a - sub_a).elements():
                g = _gain(ctx, current, sub_b, sub_b.bits, x)
                if g > best[0]:
                    best = (g, "a", x)
        if added_b < d:
            for y in (b - sub_b).elements():
                g = _gain(ctx, current, sub_a, sub_a.bits, y)
                if g > best[0]:
                    best = (g, "b", y)
        gain, side, x = best
        if side is None:
            break
        if side == "a":
            sub_a = sub_a | ZpSet(ctx, 1 << x)
            added_a += 1
        else:
            sub_b = sub_b | ZpSet(ctx, 1 << x)
            added_b += 1
        current = sumset(sub_a, sub_b).bits
    return WitnessResult(sub_a, sub_b, current.bit_count(), target, partial.tries_used, partial.seed)


def find_witness_local(a: ZpSet, b: ZpSet, budget, target: int, rng=None,
                       max_steps: int = 20000, restart_after: int = 2000, noise: float = 0.05) -> WitnessResult | None:
    """Swap-based local search for a witness of sizes exactly (c1, c2).

    Each step picks a sum of A+B not yet covered and swaps in an element that
    covers it, evicting the member whose removal loses the fewest sums.
    Worse moves survive with probability ``noise``; the search restarts from a
    fresh random pair after ``restart_after`` steps without a new best.
    """
    rng, seed = as_rng(rng)
    c1, c2 = _budget(budget).check(a, b)
    ctx = a.ctx
    n = ctx.modulus
    modp = ctx.is_modp
    size = n if modp else 2 * n
    arr_a, arr_b = a.array(), b.array()
    in_a = np.zeros(size, dtype=bool)
    in_a[arr_a] = True
    in_b = np.zeros(size, dtype=bool)
    in_b[arr_b] = True
    full = sumset(a, b) if modp else None
    full_mask = np.zeros(size, dtype=bool)
    if modp:
        full_mask[full.array()] = True
    else:
        full_mask[np.unique((arr_a[:, None] + arr_b[None, :]).ravel())] = True
    if full_mask.sum() < target:
        return None

    def fold(v):
        return v % n if modp else v

    def counts_for(sa, sb):
        cnt = np.zeros(size, dtype=np.int64)
        np.add.at(cnt, fold((sa[:, None] + sb[None, :]).ravel()), 1)
        return cnt

    steps = 0
    while steps < max_steps:
        sa = np.sort(rng.choice(arr_a, size=c1, replace=False))
        sb = np.sort(rng.choice(arr_b, size=c2, replace=False))
        cnt = counts_for(sa, sb)
        score = int(np.count_nonzero(cnt))
        best_score, stale = score, 0
        while steps < max_steps and stale < restart_after:
            if score >= target:
                return WitnessResult(ZpSet.from_array(ctx, np.sort(sa)), ZpSet.from_array(ctx, np.sort(sb)),
                                     score, target, steps, seed)
            steps += 1
            stale += 1
            missing = np.flatnonzero(full_mask & (cnt == 0))
            x = int(missing[rng.integers(len(missing))])
            # candidates covering x: a_new = x - b with b in B', or b_new = x - a with a in A'
            cand_a = fold(x - sb)
            cand_a = cand_a[(cand_a >= 0) & in_a[np.clip(cand_a, 0, size - 1)]]
            cand_a = np.setdiff1d(cand_a, sa)
            cand_b = fold(x - sa)
            cand_b = cand_b[(cand_b >= 0) & in_b[np.clip(cand_b, 0, size - 1)]]
            cand_b = np.setdiff1d(cand_b, sb)
            n_cand = len(cand_a) + len(cand_b)
            if n_cand == 0:
                continue
            pick = int(rng.integers(n_cand))
            side_a = pick < len(cand_a)
            own, other = (sa, sb) if side_a else (sb, sa)
            new = int(cand_a[pick]) if side_a else int(cand_b[pick - len(cand_a)])
            if len(own) == (len(arr_a) if side_a else len(arr_b)):
                continue
            # losses for evicting each current member
            sums = fold(own[:, None] + other[None, :])
            loss = (cnt[sums] == 1).sum(axis=1)
            # the new element's own coverage does not depend on who leaves, except overlap with
            # the evicted row; evaluate the best few exactly
            order = np.argsort(loss, kind="stable")[: min(4, len(own))]
            best_move = None
            for k in order:
                trial = cnt.copy()
                np.subtract.at(trial, sums[k], 1)
                np.add.at(trial, fold(new + other), 1)
                val = int(np.count_nonzero(trial))
                if best_move is None or val > best_move[0]:
                    best_move = (val, int(k), trial)
            val, k, trial = best_move
            if val >= score or rng.random() < noise:
                own = own.copy()
                own[k] = new
                if side_a:
                    sa = own
                else:
                    sb = own
                cnt, score = trial, val
                if score > best_score:
                    best_score, stale = score, 0
    return None


def find_witness(a: ZpSet, b: ZpSet, budget, target: int, rng=None, random_tries: int = 200,
                 local_steps: int = 20000, exhaustive_cap: int = 10**5) -> tuple[WitnessResult | None, str]:
    """Random sampling, then local search, then (when tiny) exhaustive search.

    Returns the witness (or None) and the name of the route that decided it;
    "bound" means c1*c2 or |A+B| already falls short of the target.
    """
    rng, seed = as_rng(rng)
    c1, c2 = _budget(budget).check(a, b)
    if min(c1 * c2, len(sumset(a, b))) < target:
        return None, "bound"
    res = find_witness_random(a, b, budget, target, random_tries, rng)
    if res is not None:
        return _with_seed(res, seed), "random"
    res = find_witness_local(a, b, budget, target, rng, max_steps=local_steps)
    if res is not None:
        return _with_seed(res, seed), "local"
    if math.comb(len(a), c1) * math.comb(len(b), c2) <= exhaustive_cap:
        return find_witness_exhaustive(a, b, budget, target), "exhaustive"
    return None, "exhausted"


def _with_seed(res: WitnessResult, seed) -> WitnessResult:
    return res if seed is None else WitnessResult(res.a_sub, res.b_sub, res.achieved, res.target, res.tries_used, seed)
