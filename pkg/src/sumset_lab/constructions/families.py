"""Covering the outside pieces I0, J0 by sets whose sums avoid I2 + J2."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import HypothesisViolated
from ..kernel import as_fraction, sumset
from ..zp import IntervalZp, ZpSet


@dataclass(frozen=True)
class FamiliesConfig:
    """Gates of the families construction; the theoretical one also needs alpha, beta < 2^-10."""

    param_max: Fraction = Fraction(1)


THEORETICAL_FAMILIES = FamiliesConfig(Fraction(1, 2**10))
PRACTICAL_FAMILIES = FamiliesConfig()


@dataclass(frozen=True)
class IntervalFamilies:
    """Pairs (I0^i, J2^i) and (J0^i, I2^i); empty classes are dropped."""

    I0: tuple[ZpSet, ...]
    J2: tuple[ZpSet, ...]
    J0: tuple[ZpSet, ...]
    I2: tuple[ZpSet, ...]
    tile: int
    k_bound: Fraction

    @property
    def k(self) -> int:
        return max(len(self.I0), len(self.J0))

    def to_dict(self) -> dict:
        return {"k": self.k, "k_I": len(self.I0), "k_J": len(self.J0), "tile": self.tile,
                "k_bound": float(self.k_bound),
                "I0_sizes": [len(s) for s in self.I0], "J0_sizes": [len(s) for s in self.J0],
                "J2_tiles": [s.min() for s in self.J2], "I2_tiles": [s.min() for s in self.I2]}


def _rest(parts) -> IntervalZp:
    ctx = parts[0].ctx
    total = sum(len(x) for x in parts)
    return IntervalZp(ctx, (parts[0].left + total) % ctx.modulus, ctx.modulus - total)


def _assign(outer: IntervalZp, mid_own: IntervalZp, mid_other: IntervalZp, tile: int,
            fill: ZpSet | None = None, min_fill: Fraction = Fraction(1, 2)):
    """For each x in ``outer`` the first tile T of ``mid_other`` with (x+T) missing mid_own+mid_other.

    With ``fill`` only tiles holding at least min_fill*tile points of it are used.
    """
    p = outer.ctx.modulus
    n_tiles = len(mid_other) // tile
    if len(outer) == 0:
        return (), ()
    xs = (outer.left + np.arange(len(outer))) % p
    starts = (mid_other.left + tile * np.arange(n_tiles)) % p
    s0 = (mid_own.left + mid_other.left) % p
    span = len(mid_own) + len(mid_other) - 1
    off = (xs[:, None] + starts[None, :] - s0) % p
    ok = (off >= span) & (off + tile <= p)
    if fill is not None:
        ind = fill.indicator()
        counts = ind[(starts[:, None] + np.arange(tile)[None, :]) % p].sum(axis=1)
        ok &= (counts >= min_fill * tile)[None, :]
    if not ok.any(axis=1).all():
        bad = int(xs[~ok.any(axis=1)][0])
        raise HypothesisViolated(f"no tile keeps {bad} + tile clear of the middle sumset")
    first = ok.argmax(axis=1)
    ctx = outer.ctx
    outs, tiles = [], []
    for i in range(n_tiles):
        members = xs[first == i]
        if len(members):
            outs.append(ZpSet.from_array(ctx, np.sort(members)))
            tiles.append(IntervalZp(ctx, int(starts[i]), tile).to_set())
    return tuple(outs), tuple(tiles)


def lemma10_families(I_parts, J_parts, alpha, beta, config: FamiliesConfig = PRACTICAL_FAMILIES,
                     sets: tuple[ZpSet, ZpSet] | None = None) -> IntervalFamilies:
    """Families covering I0 (paired with tiles of J2) and J0 (paired with tiles of I2).

    Tiles have size floor((beta/24) min(|I2|,|J2|)) and are laid end to end
    from the left of the middle interval; every outer point joins the class
    of the first tile whose translate misses I2+J2. Passing ``sets=(A, B)``
    skips tiles less than half full of the set they will be sampled from.
    """
    alpha, beta = as_fraction(alpha), as_fraction(beta)
    if not (config.param_max > alpha > 0 and config.param_max > beta > 0):
        raise HypothesisViolated(f"need 0 < alpha, beta < {config.param_max}")
    i1, i2, i3 = I_parts
    j1, j2, j3 = J_parts
    p = i2.ctx.modulus
    if len(i2) + len(j2) > (1 - beta / 2) * p:
        raise HypothesisViolated(f"|I2|+|J2| = {len(i2) + len(j2)} > (1-beta/2)p")
    if not (alpha / 2 * len(j2) <= len(i2) <= 2 / alpha * len(j2)):
        raise HypothesisViolated("middle intervals violate the alpha ratio")
    m = min(len(i2), len(j2))
    if m < 24 / beta:
        raise HypothesisViolated(f"min(|I2|,|J2|) = {m} below 24/beta = {float(24 / beta):.1f}")
    ends = [len(i1), len(i3), len(j1), len(j3)]
    if min(ends) < int(beta * p / 8) or max(ends) > beta * p / 4:
        raise HypothesisViolated(f"end interval sizes {ends} outside [floor(beta p/8), beta p/4]")
    tile = int(beta * m / 24)
    fill_a, fill_b = sets if sets is not None else (None, None)
    i0_fam, j2_fam = _assign(_rest(I_parts), i2, j2, tile, fill_b)
    j0_fam, i2_fam = _assign(_rest(J_parts), j2, i2, tile, fill_a)
    return IntervalFamilies(i0_fam, j2_fam, j0_fam, i2_fam, tile, 100 / (alpha * beta))


def verify_families(fam: IntervalFamilies, I_parts, J_parts) -> dict:
    """Kernel checks: coverage of I0, J0; tiles inside the middles; sums clear of I2+J2."""
    i2, j2 = I_parts[1].to_set(), J_parts[1].to_set()
    mid = sumset(i2, j2)
    ctx = i2.ctx
    union_i0 = ZpSet.empty(ctx)
    for s in fam.I0:
        union_i0 = union_i0 | s
    union_j0 = ZpSet.empty(ctx)
    for s in fam.J0:
        union_j0 = union_j0 | s
    return {
        "covers_I0": union_i0 == _rest(I_parts).to_set(),
        "covers_J0": union_j0 == _rest(J_parts).to_set(),
        "tiles_inside": all(t <= j2 for t in fam.J2) and all(t <= i2 for t in fam.I2),
        "tile_sizes": all(len(t) == fam.tile for t in fam.J2 + fam.I2),
        "disjoint_I0": all(not (sumset(a, b) & mid) for a, b in zip(fam.I0, fam.J2)),
        "disjoint_J0": all(not (sumset(a, b) & mid) for a, b in zip(fam.J0, fam.I2)),
        "k_within_bound": fam.k <= fam.k_bound,
    }
