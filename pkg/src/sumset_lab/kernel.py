"""Exact sumsets, restricted sumsets, representation counts, popularity and AP distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import BadAlpha, CapExceeded, ContextMismatch, OutOfRange, PairOutOfDomain
from .zp import Context, ProgressionZp, ZpSet, dilate

AP_BRUTE_FORCE_CAP = 101


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float literal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _same_ctx(a: ZpSet, b: ZpSet) -> Context:
    if a.ctx != b.ctx:
        raise ContextMismatch(f"{a.ctx} vs {b.ctx}")
    return a.ctx


def _fold(ctx: Context, acc: int) -> int:
    """Reduce an accumulator of shifted masks back into the context."""
    if ctx.is_modp:
        p = ctx.modulus
        while acc >> p:
            acc = (acc & ctx.mask) | (acc >> p)
        return acc
    if acc >> ctx.modulus:
        raise OutOfRange(f"sums exceed {ctx}; widen the window")
    return acc


def shifted_or(ctx: Context, shifts: Iterable[int], bits: int) -> int:
    """OR of ``bits << s`` over ``shifts``, folded into ``ctx``."""
    acc = 0
    for s in shifts:
        acc |= bits << int(s)
    return _fold(ctx, acc)


def sumset(a: ZpSet, b: ZpSet) -> ZpSet:
    ctx = _same_ctx(a, b)
    if a.size > b.size:
        a, b = b, a
    return ZpSet(ctx, shifted_or(ctx, a.array(), b.bits))


def sumset_size(a: ZpSet, b: ZpSet) -> int:
    return sumset(a, b).size


def naive_sumset(a: ZpSet, b: ZpSet) -> ZpSet:
    """Double loop over elements; kept as an independent oracle."""
    ctx = _same_ctx(a, b)
    out = set()
    for x in a.elements():
        for y in b.elements():
            s = x + y
            if ctx.is_modp:
                s %= ctx.modulus
            elif s >= ctx.modulus:
                raise OutOfRange(f"sums exceed {ctx}")
            out.add(s)
    return ZpSet.from_array(ctx, sorted(out))


@dataclass(frozen=True)
class RestrictedPairSet:
    """Admitted pairs Gamma inside A x B, stored as one B-bitmask per a."""

    a: ZpSet
    b: ZpSet
    rows: Mapping[int, int]

    @property
    def count(self) -> int:
        return sum(row.bit_count() for row in self.rows.values())

    def __contains__(self, pair) -> bool:
        x, y = pair
        return (self.rows.get(int(x), 0) >> int(y)) & 1 == 1

    def pairs(self) -> list[tuple[int, int]]:
        ctx = self.a.ctx
        out = []
        for x in sorted(self.rows):
            for y in ZpSet(ctx, self.rows[x]).elements():
                out.append((x, y))
        return out

    def complement(self) -> "RestrictedPairSet":
        rows = {}
        for x in self.a.elements():
            rest = self.b.bits & ~self.rows.get(x, 0)
            if rest:
                rows[x] = rest
        return RestrictedPairSet(self.a, self.b, rows)

    @classmethod
    def full(cls, a: ZpSet, b: ZpSet) -> "RestrictedPairSet":
        _same_ctx(a, b)
        return cls(a, b, {x: b.bits for x in a.elements()} if b.bits else {})

    @classmethod
    def empty(cls, a: ZpSet, b: ZpSet) -> "RestrictedPairSet":
        _same_ctx(a, b)
        return cls(a, b, {})

    @classmethod
    def from_pairs(cls, a: ZpSet, b: ZpSet, pairs: Iterable[tuple[int, int]]) -> "RestrictedPairSet":
        _same_ctx(a, b)
        rows: dict[int, int] = {}
        for x, y in pairs:
            x, y = int(x), int(y)
            if x not in a or y not in b:
                raise PairOutOfDomain(f"({x}, {y}) not in A x B")
            rows[x] = rows.get(x, 0) | (1 << y)
        return cls(a, b, rows)


def restricted_sumset(a: ZpSet, b: ZpSet, gamma: RestrictedPairSet) -> ZpSet:
    ctx = _same_ctx(a, b)
    if gamma.a != a or gamma.b != b:
        raise PairOutOfDomain("restriction was built for a different (A, B)")
    acc = 0
    for x, row in gamma.rows.items():
        if x not in a or row & ~b.bits:
            raise PairOutOfDomain(f"row {x} admits pairs outside A x B")
        acc |= row << x
    return ZpSet(ctx, _fold(ctx, acc))


@dataclass(frozen=True)
class RepProfile:
    """r(x) = #{(a, b) in A x B : a + b = x} for every x of the context."""

    ctx: Context
    counts: np.ndarray
    total: int

    def __getitem__(self, x: int) -> int:
        return int(self.counts[x])

    def support(self) -> ZpSet:
        return ZpSet.from_array(self.ctx, np.flatnonzero(self.counts))

    def as_dict(self) -> dict[int, int]:
        nz = np.flatnonzero(self.counts)
        return {int(x): int(self.counts[x]) for x in nz}


_CHUNK = 1 << 22


def rep_profile(a: ZpSet, b: ZpSet) -> RepProfile:
    ctx = _same_ctx(a, b)
    xs, ys = a.array(), b.array()
    if len(xs) > len(ys):
        xs, ys = ys, xs
    n = ctx.modulus
    counts = np.zeros(n, dtype=np.int64)
    if len(xs) and len(ys):
        step = max(1, _CHUNK // len(ys))
        for lo in range(0, len(xs), step):
            sums = (xs[lo:lo + step, None] + ys[None, :]).ravel()
            if ctx.is_modp:
                sums %= n
            elif sums.max() >= n:
                raise OutOfRange(f"sums exceed {ctx}; widen the window")
            counts += np.bincount(sums, minlength=n)
    return RepProfile(ctx, counts, int(a.size) * int(b.size))


@dataclass(frozen=True)
class PopularityPartition:
    alpha: Fraction
    popular: ZpSet
    unpopular: ZpSet
    gamma_count: int
    gamma: RestrictedPairSet
    profile: RepProfile


def popularity_partition(a: ZpSet, b: ZpSet, alpha) -> PopularityPartition:
    """Split A+B into popular (r(x) >= alpha*|B|) and unpopular sums.

    Operand order matters: the threshold always scales with the second
    operand, and nothing is swapped behind the caller's back.
    """
    alpha = as_fraction(alpha)
    if not (0 < alpha <= 1):
        raise BadAlpha(f"alpha must lie in (0, 1], got {alpha}")
    ctx = _same_ctx(a, b)
    prof = rep_profile(a, b)
    r = prof.counts
    hit = r > 0
    # r is an integer, so r >= alpha*|B| iff r >= ceil(alpha*|B|) <= |B|
    pop_mask = hit & (r >= math.ceil(alpha * b.size))
    popular = ZpSet.from_array(ctx, np.flatnonzero(pop_mask))
    unpopular = ZpSet.from_array(ctx, np.flatnonzero(hit & ~pop_mask))
    rows = {}
    for x in a.elements():
        if ctx.is_modp:
            shifted = ((popular.bits >> x) | (popular.bits << (ctx.modulus - x))) & ctx.mask
        else:
            shifted = popular.bits >> x
        row = shifted & b.bits
        if row:
            rows[x] = row
    gamma = RestrictedPairSet(a, b, rows)
    return PopularityPartition(alpha, popular, unpopular, int(r[pop_mask].sum()), gamma, prof)


# --- arithmetic-progression distance -------------------------------------------------


@dataclass(frozen=True)
class APFit:
    progression: ProgressionZp
    partner: ProgressionZp | None
    distance: int
    exact: bool = True


def _interval_distance_table(s: ZpSet) -> np.ndarray:
    """D[u, L] = |S delta [u, u+L)| for every start u and length 0..p (cyclic)."""
    p = s.ctx.modulus
    ind = s.indicator()
    pre = np.concatenate(([0], np.cumsum(np.concatenate((ind, ind)))))
    u = np.arange(p)[:, None]
    lengths = np.arange(p + 1)[None, :]
    inside = pre[u + lengths] - pre[u]
    return s.size + lengths - 2 * inside


def _best_in_table(table: np.ndarray, delta: int, p: int, bound: int) -> tuple[int, int]:
    """Smallest (start, length) with table entry <= bound; start is in original coordinates."""
    us, ls = np.nonzero(table <= bound)
    starts = (us * delta) % p
    order = np.lexsort((ls, starts))
    k = order[0]
    return int(starts[k]), int(ls[k])


def ap_distance(s: ZpSet, partner: ZpSet | None = None, cap: int = AP_BRUTE_FORCE_CAP) -> APFit:
    """Exhaustive nearest arithmetic progression(s) in Z_p.

    Single form minimises |S delta P|. Pair form finds P, Q with one common
    difference minimising max(|A delta P|, |B delta Q|). Differences d and p-d
    describe the same progressions, so only 1 <= d <= (p-1)/2 is scanned.
    Ties go to the smaller difference, then smaller start, then shorter length.
    """
    ctx = s.ctx
    if not ctx.is_modp:
        raise ValueError("ap_distance works in Z_p only")
    if partner is not None:
        _same_ctx(s, partner)
    p = ctx.modulus
    if p > cap:
        raise CapExceeded(f"p={p} above brute-force cap {cap}")
    if not s:
        raise ValueError("ap_distance needs a non-empty set")

    best = None
    for delta in range(1, max(1, (p - 1) // 2) + 1):
        inv = pow(delta, -1, p)
        ta = _interval_distance_table(dilate(s, inv))
        va = int(ta.min())
        if partner is None:
            value, tb = va, None
        else:
            tb = _interval_distance_table(dilate(partner, inv))
            value = max(va, int(tb.min()))
        if best is None or value < best[0]:
            best = (value, delta, ta, tb)
    value, delta, ta, tb = best
    # each side takes its own optimum under the winning difference
    start, length = _best_in_table(ta, delta, p, int(ta.min()))
    prog = ProgressionZp(ctx, start, delta, length)
    other = None
    if tb is not None:
        qs, ql = _best_in_table(tb, delta, p, int(tb.min()))
        other = ProgressionZp(ctx, qs, delta, ql)
    return APFit(prog, other, value)


def best_interval_fit(s: ZpSet) -> tuple[int, int, int]:
    """Cyclic interval P minimising |S delta P|: returns (start, length, distance).

    Linear-time: maximise sum(+1 on members, -1 elsewhere) over cyclic windows.
    """
    p = s.ctx.modulus
    v = 2 * s.indicator() - 1
    pre = np.concatenate(([0], np.cumsum(v)))
    idx = np.arange(p + 1)
    # linear windows [i, j): maximise pre[j] - min_{i<=j} pre[i]
    run_min = np.minimum.accumulate(pre)
    at_min = np.maximum.accumulate(np.where(pre == run_min, idx, 0))
    gains = pre - run_min
    j = int(np.argmax(gains))
    best_gain, best = int(gains[j]), (int(at_min[j]) % p, j - int(at_min[j]))
    if s.ctx.is_modp:
        # wrapping windows are complements of linear windows [i, j)
        run_max = np.maximum.accumulate(pre)
        at_max = np.maximum.accumulate(np.where(pre == run_max, idx, 0))
        drops = run_max - pre
        j2 = int(np.argmax(drops))
        wrap_gain = int(pre[-1]) + int(drops[j2])
        if wrap_gain > best_gain:
            i2 = int(at_max[j2])
            best_gain, best = wrap_gain, (j2 % p, p - (j2 - i2))
    return best[0], best[1], s.size - best_gain


def ap_fit_voting(s: ZpSet, partner: ZpSet | None, rng: np.random.Generator,
                  samples: int = 64, candidates: int = 8) -> APFit:
    """Randomised AP fit for p above the brute-force cap.

    Sampled base points vote for differences e with (x + e) in the set; the
    top-voted differences (with 1 always included) are each scored exactly
    by the best cyclic-interval fit after dilating by e^-1.
    """
    ctx = s.ctx
    p = ctx.modulus
    votes = np.zeros(p, dtype=np.int64)
    for target in (s, partner) if partner is not None else (s,):
        arr = target.array()
        ind = target.indicator()
        picks = rng.choice(arr, size=min(samples, len(arr)), replace=False)
        for x in picks:
            votes += np.roll(ind, -int(x))
    votes[0] = 0
    folded = votes[1:(p - 1) // 2 + 1] + votes[p - 1:(p - 1) // 2:-1] if p > 2 else votes[1:]
    order = np.argsort(-folded, kind="stable")[:candidates] + 1
    deltas = sorted({1, *map(int, order)})
    best = None
    for delta in deltas:
        inv = pow(delta, -1, p)
        ua, la, da = best_interval_fit(dilate(s, inv))
        fit_b = best_interval_fit(dilate(partner, inv)) if partner is not None else None
        value = da if fit_b is None else max(da, fit_b[2])
        if best is None or value < best[0]:
            best = (value, delta, (ua, la), fit_b)
    value, delta, (ua, la), fit_b = best
    prog = ProgressionZp(ctx, (ua * delta) % p, delta, la)
    other = ProgressionZp(ctx, (fit_b[0] * delta) % p, delta, fit_b[1]) if fit_b else None
    return APFit(prog, other, value, exact=False)
