"""End-to-end search for a witness (A', B') with |A'+B'| >= |A|+|B|-1.

Cheap searches run first. When they fail, the sets are treated as near
arithmetic progressions: dilate to near-intervals, balance the ends, build
the bulk witness from fibre families, cover the outside points with
stickout pairs, and take the union. Every stage that misses its target
raises StageFailed naming the stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import HypothesisViolated, SumsetLabError, StageFailed
from ..kernel import AP_BRUTE_FORCE_CAP, ap_distance, ap_fit_voting, as_fraction, sumset
from ..rng import as_rng
from ..witness import WitnessResult, find_witness_local, find_witness_random
from ..zp import IntervalZp, ZpSet, dilate
from .families import PRACTICAL_FAMILIES, FamiliesConfig, lemma10_families
from .fibres import ConstructionParams, thm5_construct
from .stickout import stickout_chain
from .surgery import PRACTICAL_LADDER, LadderConfig, lemma7_surgery


@dataclass(frozen=True)
class PipelineConfig:
    fast_path: bool = True
    random_tries: int = 200
    local_steps: int = 20000
    c: int = 1  # gate: c1 c2 >= c max(|A|,|B|)
    ap_cap: int = AP_BRUTE_FORCE_CAP
    ap_samples: int = 64
    ladder: LadderConfig = PRACTICAL_LADDER
    families: FamiliesConfig = PRACTICAL_FAMILIES
    construction: ConstructionParams = field(default_factory=ConstructionParams)
    stickout_restarts: int = 100
    stickout_product: int = 4  # per-stage c1 c2 >= stickout_product |X|

    def to_dict(self) -> dict:
        return {"fast_path": self.fast_path, "random_tries": self.random_tries, "local_steps": self.local_steps,
                "c": self.c, "ap_cap": self.ap_cap, "ap_samples": self.ap_samples,
                "ladder": self.ladder.to_dict(), "construction": self.construction.to_dict(),
                "stickout_restarts": self.stickout_restarts, "stickout_product": self.stickout_product}


@dataclass(frozen=True)
class PipelineResult:
    witness: WitnessResult
    branch: str
    stages: dict

    @property
    def found(self) -> bool:
        return self.witness.found

    def to_dict(self) -> dict:
        return {"branch": self.branch, **self.witness.to_dict(), "stages": self.stages}


def _iv(x: IntervalZp) -> list[int]:
    return [x.left, x.length]


def thm1_pipeline(a: ZpSet, b: ZpSet, budget, alpha, beta, rng=None,
                  config: PipelineConfig | None = None) -> PipelineResult:
    config = config or PipelineConfig()
    rng, seed = as_rng(rng)
    ctx = a.ctx
    if not ctx.is_modp or b.ctx != ctx:
        raise HypothesisViolated("the pipeline needs two subsets of the same Z_p")
    p = ctx.modulus
    alpha, beta = as_fraction(alpha), as_fraction(beta)
    c1, c2 = map(int, budget)
    na, nb = len(a), len(b)
    if not (alpha * nb <= na <= nb / alpha):
        raise HypothesisViolated(f"|A|={na}, |B|={nb} violate the alpha ratio {alpha}")
    if na + nb > (1 - beta) * p:
        raise HypothesisViolated(f"|A|+|B| = {na + nb} > (1-beta)p")
    if not (1 <= c1 <= na and 1 <= c2 <= nb):
        raise HypothesisViolated(f"budget ({c1}, {c2}) outside [1,{na}] x [1,{nb}]")
    if c1 * c2 < config.c * max(na, nb):
        raise HypothesisViolated(f"c1*c2 = {c1 * c2} < c*max = {config.c * max(na, nb)}")
    target = na + nb - 1
    stages: dict = {"target": target}
    if c1 * c2 < target:
        # |A'+B'| <= c1 c2, so no construction can reach the target
        raise StageFailed("bound", {"c1c2": c1 * c2, "target": target})

    if config.fast_path:
        res = find_witness_random(a, b, (c1, c2), target, config.random_tries, rng)
        route = "random"
        if res is None:
            res = find_witness_local(a, b, (c1, c2), target, rng, max_steps=config.local_steps)
            route = "local"
        stages["fast_path"] = {"found": res is not None, "route": route}
        if res is not None:
            return PipelineResult(WitnessResult(res.a_sub, res.b_sub, res.achieved, target, res.tries_used, seed),
                                  "fast_path", stages)

    # --- progression structure ---------------------------------------------------------
    if p <= config.ap_cap:
        fit = ap_distance(a, b, cap=config.ap_cap)
    else:
        fit = ap_fit_voting(a, b, rng, samples=config.ap_samples)
    delta = fit.progression.difference
    inv = pow(delta, -1, p)
    stages["ap_fit"] = {"difference": delta, "distance": fit.distance, "exact": fit.exact}
    A, B = dilate(a, inv), dilate(b, inv)
    I = IntervalZp(ctx, (fit.progression.start * inv) % p, fit.progression.length)
    J = IntervalZp(ctx, (fit.partner.start * inv) % p, fit.partner.length)
    m = min(na, nb)
    gamma = Fraction(max(2 * fit.distance, 1), 2 * m)

    # --- ends --------------------------------------------------------------------------
    try:
        surgery = lemma7_surgery(A, B, I, J, beta, gamma, config.ladder, ap_cap=config.ap_cap)
    except HypothesisViolated as exc:
        raise StageFailed("surgery", {"gamma": float(gamma), "reason": str(exc)}) from exc
    stages["surgery"] = surgery.to_dict()
    sub_a, sub_b = ZpSet.empty(ctx), ZpSet.empty(ctx)
    end_sums = ZpSet.empty(ctx)
    end_mass = 0
    for i in (0, 2):
        ai, bi = surgery.A_parts[i], surgery.B_parts[i]
        if not ai:
            continue
        got = len(sumset(ai, bi))
        if got < len(ai) + len(bi):
            raise StageFailed("ends", {"piece": i + 1, "sizes": [len(ai), len(bi)], "sumset": got})
        sub_a, sub_b = sub_a | ai, sub_b | bi
        end_sums = end_sums | sumset(ai, bi)
        end_mass += len(ai) + len(bi)
    z = ZpSet.from_array(ctx, end_sums.array()[:end_mass])
    stages["ends"] = {"mass": end_mass, "z_size": len(z)}

    # --- outside points ------------------------------------------------------------------
    try:
        fam = lemma10_families(surgery.I_parts, surgery.J_parts, alpha, beta, config.families, sets=(A, B))
    except HypothesisViolated as exc:
        raise StageFailed("families", {"reason": str(exc)}) from exc
    xs, ys, budgets, sides = [], [], [], []
    for outer, tile, own, other, side in ((fam.I0, fam.J2, A, B, "A"), (fam.J0, fam.I2, B, A, "B")):
        for o, t in zip(outer, tile):
            x = own & o
            y = other & t
            if not x:
                continue
            cx = len(x)
            cy = min(len(y), max(2, math.ceil(config.stickout_product * len(x) / cx)))
            if cy < 1:
                raise StageFailed("stickout", {"reason": "empty tile", "side": side})
            xs.append(x)
            ys.append(y)
            budgets.append((cx, cy))
            sides.append(side)
    outside = len(A) - sum(len(x) for x in surgery.A_parts)
    outside_b = len(B) - sum(len(x) for x in surgery.B_parts)
    need = outside + outside_b
    if xs:
        chain = stickout_chain(xs, ys, z, budgets, rng, config.stickout_restarts, target=need, strict=False)
        for (x_sub, y_sub), side in zip(chain.pairs, sides):
            if side == "A":
                sub_a, sub_b = sub_a | x_sub, sub_b | y_sub
            else:
                sub_b, sub_a = sub_b | x_sub, sub_a | y_sub
        stages["stickout"] = {"stages": len(xs), **chain.to_dict()}
    else:
        stages["stickout"] = {"stages": 0}
    stages["families"] = {"k": fam.k, "tile": fam.tile, "outside_mass": need}

    # --- bulk ----------------------------------------------------------------------------
    used_a, used_b = len(sub_a), len(sub_b)
    a2, b2 = surgery.A_parts[1], surgery.B_parts[1]
    r1, r2 = min(c1 - used_a, len(a2)), min(c2 - used_b, len(b2))
    if r1 < 1 or r2 < 1:
        raise StageFailed("thm5", {"reason": "no budget left", "used": [used_a, used_b]})
    try:
        bulk = thm5_construct(a2, b2, surgery.I_parts[1], surgery.J_parts[1], (r1, r2), config.construction, rng)
    except SumsetLabError as exc:
        raise StageFailed("thm5", {"budget": [r1, r2], "reason": str(exc)}) from exc
    stages["thm5"] = {"budget": [r1, r2], **{k: v for k, v in bulk.to_dict().items() if k not in ("a_sub", "b_sub")}}
    if not bulk.found:
        raise StageFailed("thm5", stages["thm5"])
    sub_a, sub_b = sub_a | bulk.witness.a_sub, sub_b | bulk.witness.b_sub

    # --- assembly, verified in the caller's coordinates ------------------------------------
    out_a, out_b = dilate(sub_a, delta), dilate(sub_b, delta)
    achieved = len(sumset(out_a, out_b))
    check = {"achieved": achieved, "sizes": [len(out_a), len(out_b)],
             "subsets": bool(out_a <= a and out_b <= b)}
    stages["assembly"] = check
    if achieved < target or len(out_a) > c1 or len(out_b) > c2 or not check["subsets"]:
        raise StageFailed("assembly", check)
    return PipelineResult(WitnessResult(out_a, out_b, achieved, target, 0, seed), "structured", stages)
