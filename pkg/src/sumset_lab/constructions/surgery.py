"""Re-cutting the ends of two near-intervals so the stray mass balances.

Given A close to an interval I and B close to J, produce consecutive
intervals I1, I2, I3 and J1, J2, J3 with |A ∩ I1| = |B ∩ J1| and
|A ∩ I3| = |B ∩ J3|, the middle pieces still close to A and B.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import HypothesisViolated
from ..kernel import AP_BRUTE_FORCE_CAP, ap_distance, as_fraction
from ..zp import IntervalZp, ZpSet


@dataclass(frozen=True)
class LadderConfig:
    """Constants of the interval-ends argument.

    beta_max   upper gate on beta
    ratio      beta must exceed ratio * gamma
    slack      the middle intervals may differ from A, B by slack * gamma * min(|A|,|B|)
    end_factor the new end pieces collect end_factor times the stray mass
    anti_ap    lower bound factor 1/anti_ap for the end pieces' AP distance
    """

    beta_max: Fraction = Fraction(1, 2)
    ratio: Fraction = Fraction(16)
    slack: Fraction = Fraction(4)
    end_factor: int = 14
    anti_ap: int = 2**10

    def to_dict(self) -> dict:
        return {"beta_max": str(self.beta_max), "ratio": str(self.ratio), "slack": str(self.slack),
                "end_factor": self.end_factor, "anti_ap": self.anti_ap}


THEORETICAL_LADDER = LadderConfig(Fraction(1, 2**20), Fraction(2**20), Fraction(2**10), 14, 2**10)
PRACTICAL_LADDER = LadderConfig()


@dataclass(frozen=True)
class IntervalSurgery:
    I_parts: tuple[IntervalZp, IntervalZp, IntervalZp]
    J_parts: tuple[IntervalZp, IntervalZp, IntervalZp]
    A_parts: tuple[ZpSet, ZpSet, ZpSet]
    B_parts: tuple[ZpSet, ZpSet, ZpSet]
    I2_prime: IntervalZp
    J2_prime: IntervalZp
    beta: Fraction
    gamma: Fraction
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def I0(self) -> IntervalZp:
        return _rest(self.I_parts)

    @property
    def J0(self) -> IntervalZp:
        return _rest(self.J_parts)

    def invariants(self) -> dict:
        """Exact checks of the balancing and size-window conclusions."""
        p = self.I_parts[0].ctx.modulus
        a1, _, a3 = map(len, self.A_parts)
        b1, _, b3 = map(len, self.B_parts)
        ends = [len(self.I_parts[0]), len(self.I_parts[2]), len(self.J_parts[0]), len(self.J_parts[2])]
        lo = int(self.beta * p / 8)  # floor of a positive rational
        return {
            "balanced_1": a1 == b1,
            "balanced_3": a3 == b3,
            "window_low": min(ends) >= lo,
            "window_high": max(ends) <= self.beta * p / 4,
            "consecutive": _consecutive(self.I_parts) and _consecutive(self.J_parts),
        }

    def to_dict(self) -> dict:
        def iv(x):
            return [x.left, x.length]

        return {"I_parts": [iv(x) for x in self.I_parts], "J_parts": [iv(x) for x in self.J_parts],
                "A_sizes": [len(x) for x in self.A_parts], "B_sizes": [len(x) for x in self.B_parts],
                "I2_prime": iv(self.I2_prime), "J2_prime": iv(self.J2_prime),
                "invariants": self.invariants(), **self.diagnostics}


def _rest(parts) -> IntervalZp:
    ctx = parts[0].ctx
    total = sum(len(x) for x in parts)
    return IntervalZp(ctx, (parts[0].left + total) % ctx.modulus, ctx.modulus - total)


def _consecutive(parts) -> bool:
    p = parts[0].ctx.modulus
    return all((parts[i].left + len(parts[i])) % p == parts[i + 1].left % p for i in range(2))


def _window(s: ZpSet, left: int, length: int) -> np.ndarray:
    """Membership indicator of s along [left, left+length) in walking order."""
    p = s.ctx.modulus
    return s.indicator()[(left + np.arange(length)) % p]


def maximal_near_interval(s: ZpSet, bound) -> IntervalZp:
    """Longest cyclic interval P with |S delta P| <= bound; first start ascending on ties."""
    ctx = s.ctx
    p = ctx.modulus
    bound = as_fraction(bound)
    ind = s.indicator().astype(np.int64)
    pre = np.concatenate(([0], np.cumsum(np.concatenate((ind, ind)))))
    u = np.arange(p)
    top = min(p, len(s) + int(bound))
    for length in range(top, -1, -1):
        inside = pre[u + length] - pre[u]
        ok = np.flatnonzero(len(s) + length - 2 * inside <= bound)
        if len(ok):
            return IntervalZp(ctx, int(ok[0]), length)
    raise HypothesisViolated("no interval within the allowed distance")


def _minimal_lead(ind: np.ndarray, stray: int, end_factor: int) -> int | None:
    """Shortest prefix length L of ``ind`` whose members number >= end_factor*stray
    and are within (members/end_factor) of some sub-interval."""
    if stray == 0:
        return 0
    v = np.where(ind > 0, 1, -1)
    pre = np.concatenate(([0], np.cumsum(v)))
    count = np.concatenate(([0], np.cumsum(ind)))
    best = np.maximum.accumulate(pre - np.minimum.accumulate(pre))
    fit = count - best  # minimal |P delta A''| with P inside the prefix (empty P allowed)
    ok = np.flatnonzero((count >= end_factor * stray) & (end_factor * fit <= count))
    return int(ok[0]) if len(ok) else None


def _balancing(ind: np.ndarray, need: int) -> int | None:
    if need == 0:
        return 0
    pos = np.flatnonzero(ind)
    return int(pos[need - 1]) + 1 if len(pos) >= need else None


def lemma7_surgery(a: ZpSet, b: ZpSet, I: IntervalZp, J: IntervalZp, beta, gamma,
                   ladder: LadderConfig = PRACTICAL_LADDER, ap_cap: int = AP_BRUTE_FORCE_CAP) -> IntervalSurgery:
    """Split I and J into (I1, I2, I3), (J1, J2, J3) balancing the end masses.

    Procedure: take maximal I2', J2' within slack*gamma*min of A, B; put end
    blocks of floor(beta p/8) on both sides; on each side the set with more
    mass in its end block grows a minimal piece into I2' (or J2') that holds
    end_factor times that mass and is interval-like, and the other set grows
    a piece that exactly balances the counts.
    """
    ctx = a.ctx
    if not ctx.is_modp or b.ctx != ctx:
        raise HypothesisViolated("surgery works on two subsets of the same Z_p")
    p = ctx.modulus
    beta, gamma = as_fraction(beta), as_fraction(gamma)
    if not (ladder.beta_max > beta > ladder.ratio * gamma > 0):
        raise HypothesisViolated(f"need {ladder.beta_max} > beta={beta} > {ladder.ratio}*gamma={ladder.ratio * gamma} > 0")
    m = min(len(a), len(b))
    if len(a) + len(b) > (1 - beta) * p:
        raise HypothesisViolated(f"|A|+|B| = {len(a) + len(b)} > (1-beta)p")
    dist = max(a.symdiff_size(I.to_set()), b.symdiff_size(J.to_set()))
    if dist > gamma * m:
        raise HypothesisViolated(f"max(|A delta I|, |B delta J|) = {dist} > gamma*min = {float(gamma * m):.3f}")

    bound = ladder.slack * gamma * m
    i2p, j2p = maximal_near_interval(a, bound), maximal_near_interval(b, bound)
    blk = int(beta * p / 8)
    if len(i2p) + 2 * blk > p or len(j2p) + 2 * blk > p:
        raise HypothesisViolated("end blocks do not fit around the middle intervals")

    # stray masses in the four end blocks
    def mass(s, left, length):
        return int(_window(s, left, length).sum())

    a1p, a3p = mass(a, i2p.left - blk, blk), mass(a, i2p.left + len(i2p), blk)
    b1p, b3p = mass(b, j2p.left - blk, blk), mass(b, j2p.left + len(j2p), blk)

    def grow(s, mid: IntervalZp, side: int) -> np.ndarray:
        """Indicator of s walking into ``mid`` from its side-1 (left) or side-3 (right) end."""
        ind = _window(s, mid.left, len(mid))
        return ind if side == 1 else ind[::-1]

    cuts = {}
    for side, (sa, sb) in ((1, (a1p, b1p)), (3, (a3p, b3p))):
        a_leads = sa >= sb
        lead_set, lead_mid, lead_stray = (a, i2p, sa) if a_leads else (b, j2p, sb)
        other_set, other_mid, other_stray = (b, j2p, sb) if a_leads else (a, i2p, sa)
        lead_ind = grow(lead_set, lead_mid, side)
        n_lead = _minimal_lead(lead_ind, lead_stray, ladder.end_factor)
        if n_lead is None:
            raise HypothesisViolated(f"no interval-like end piece on side {side}")
        need = lead_stray + int(lead_ind[:n_lead].sum()) - other_stray
        n_other = _balancing(grow(other_set, other_mid, side), need)
        if n_other is None:
            raise HypothesisViolated(f"cannot balance end {side}: need {need} more points")
        cuts[side] = (n_lead, n_other) if a_leads else (n_other, n_lead)
        cuts[side] += (a_leads,)
    (ia1, jb1, lead1), (ia3, jb3, lead3) = cuts[1], cuts[3]
    if ia1 + ia3 > len(i2p) or jb1 + jb3 > len(j2p):
        raise HypothesisViolated("end pieces overlap inside the middle interval")

    def parts(mid: IntervalZp, n1: int, n3: int):
        i1 = IntervalZp(ctx, (mid.left - blk) % p, blk + n1)
        i2 = IntervalZp(ctx, (mid.left + n1) % p, len(mid) - n1 - n3)
        i3 = IntervalZp(ctx, (mid.left + len(mid) - n3) % p, n3 + blk)
        return i1, i2, i3

    ip, jp = parts(i2p, ia1, ia3), parts(j2p, jb1, jb3)
    a_parts = tuple(a & x.to_set() for x in ip)
    b_parts = tuple(b & x.to_set() for x in jp)
    diag = {
        "stray": {"A1'": a1p, "A3'": a3p, "B1'": b1p, "B3'": b3p},
        "lead": {"1": "A" if lead1 else "B", "3": "A" if lead3 else "B"},
        "middle_distance": [a.symdiff_size(ip[1].to_set()), b.symdiff_size(jp[1].to_set())],
        "middle_bound_theoretical": float(2**10 * gamma * m),
        "middle_bound_ok": max(a.symdiff_size(ip[1].to_set()), b.symdiff_size(jp[1].to_set())) <= 2**10 * gamma * m,
        "anti_ap": _anti_ap(a_parts, b_parts, ladder.anti_ap, ap_cap),
    }
    return IntervalSurgery(ip, jp, a_parts, b_parts, i2p, j2p, beta, gamma, diag)


def _anti_ap(a_parts, b_parts, factor: int, cap: int):
    """For the end pieces: max(dist(A_i, APs), dist(B_i, APs)) >= |A_i|/factor; None above the cap."""
    p = a_parts[0].ctx.modulus
    if p > cap:
        return None
    out = {}
    for i in (0, 2):
        ai, bi = a_parts[i], b_parts[i]
        if not ai and not bi:
            out[str(i + 1)] = True
            continue
        da = ap_distance(ai, cap=cap).distance if ai else 0
        db = ap_distance(bi, cap=cap).distance if bi else 0
        out[str(i + 1)] = factor * max(da, db) >= len(ai)
    return out
