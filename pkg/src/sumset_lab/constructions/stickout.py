"""Sampling pairs whose sumset sticks out of a forbidden set Z."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..errors import BudgetExceedsSet, HypothesisViolated, StageFailed, StickoutNotFound
from ..kernel import sumset
from ..rng import as_rng
from ..witness import sample_c_subset
from ..zp import ZpSet


@dataclass(frozen=True)
class StickoutResult:
    x_sub: ZpSet
    y_sub: ZpSet
    stickout: int
    target: int
    restarts: int

    def to_dict(self) -> dict:
        return {"x_sub": list(self.x_sub.elements()), "y_sub": list(self.y_sub.elements()),
                "stickout": self.stickout, "target": self.target, "restarts": self.restarts}


def check_stickout_hypotheses(x: ZpSet, y: ZpSet, z: ZpSet, budget, factor: int = 8) -> None:
    """c1 c2 >= 16|X|, factor*|X| <= |Y|, factor*|Z| <= |Y| and |Y| < p/2."""
    c1, c2 = map(int, budget)
    if not (1 <= c1 <= len(x)) or not (1 <= c2 <= len(y)):
        raise BudgetExceedsSet(f"budget ({c1}, {c2}) vs sizes ({len(x)}, {len(y)})")
    if c1 * c2 < 16 * len(x):
        raise HypothesisViolated(f"c1*c2 = {c1 * c2} < 16|X| = {16 * len(x)}")
    if factor * len(x) > len(y) or factor * len(z) > len(y):
        raise HypothesisViolated(f"need {factor}|X|, {factor}|Z| <= |Y| (|X|={len(x)}, |Z|={len(z)}, |Y|={len(y)})")
    if y.ctx.is_modp and 2 * len(y) >= y.ctx.modulus:
        raise HypothesisViolated(f"|Y| = {len(y)} not below p/2")


def stickout_search(x: ZpSet, y: ZpSet, z: ZpSet, budget, rng=None, max_restarts: int = 100,
                    target: int | None = None, factor: int = 8, check: bool = True) -> StickoutResult:
    """Uniform (c1, c2)-subsets until |(X'+Y') \\ Z| >= target (default 2|X|)."""
    if check:
        check_stickout_hypotheses(x, y, z, budget, factor)
    rng, _ = as_rng(rng)
    c1, c2 = map(int, budget)
    target = 2 * len(x) if target is None else target
    best = -1
    for attempt in range(1, max_restarts + 1):
        xs = sample_c_subset(x, c1, rng)
        ys = sample_c_subset(y, c2, rng)
        got = len(sumset(xs, ys) - z)
        best = max(best, got)
        if got >= target:
            return StickoutResult(xs, ys, got, target, attempt)
    raise StickoutNotFound(f"best stickout {best} < {target} after {max_restarts} restarts")


@dataclass(frozen=True)
class ChainResult:
    pairs: tuple[tuple[ZpSet, ZpSet], ...]
    achieved: int
    target: Fraction
    skipped: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.achieved >= self.target

    def to_dict(self) -> dict:
        return {"achieved": self.achieved, "target": float(self.target), "ok": self.ok,
                "skipped": list(self.skipped),
                "sizes": [[len(a), len(b)] for a, b in self.pairs]}


def stickout_chain(xs: list[ZpSet], ys: list[ZpSet], z: ZpSet, budgets, rng=None,
                   max_restarts: int = 100, target=None, strict: bool = True) -> ChainResult:
    """Stickout stages run in order, each treating earlier stages' sums as forbidden.

    Aims at |U_i (X'_i+Y'_i) \\ Z| >= min(min_i |Y_i|/16, 2 sum_i |X_i|), or at
    ``target`` when given. Once the running total meets it, later stages are
    skipped (empty pair). Hypothesis failures (checked when ``strict``) and
    sampling misses raise StageFailed naming the stage.
    """
    if not (len(xs) == len(ys) == len(budgets)):
        raise ValueError("xs, ys and budgets must have equal length")
    rng, _ = as_rng(rng)
    if not xs:
        return ChainResult((), 0, Fraction(0), ())
    for i, (x, y, bud) in enumerate(zip(xs, ys, budgets)):
        try:
            if strict:
                check_stickout_hypotheses(x, y, z, bud, factor=16)
            elif not (1 <= bud[0] <= len(x) and 1 <= bud[1] <= len(y)):
                raise BudgetExceedsSet(f"budget {tuple(bud)} vs sizes ({len(x)}, {len(y)})")
        except (HypothesisViolated, BudgetExceedsSet) as exc:
            raise StageFailed(f"stickout[{i}]", {"reason": str(exc)}) from exc
    if target is None:
        target = min(min(Fraction(len(y), 16) for y in ys), Fraction(2 * sum(len(x) for x in xs)))
    target = Fraction(target)
    ctx = z.ctx
    forbidden = z
    covered = ZpSet.empty(ctx)
    pairs, skipped = [], []
    for i, (x, y, bud) in enumerate(zip(xs, ys, budgets)):
        have = len(covered)
        if have >= target:
            pairs.append((ZpSet.empty(ctx), ZpSet.empty(ctx)))
            skipped.append(i)
            continue
        need = min(2 * len(x), math.ceil(target - have))
        try:
            res = stickout_search(x, y, forbidden, bud, rng, max_restarts, target=need, check=False)
        except StickoutNotFound as exc:
            raise StageFailed(f"stickout[{i}]", {"need": need, "covered": have, "reason": str(exc)}) from exc
        new = sumset(res.x_sub, res.y_sub) - forbidden
        covered = covered | new
        forbidden = forbidden | new
        pairs.append((res.x_sub, res.y_sub))
    return ChainResult(tuple(pairs), len(covered), target, tuple(skipped))
