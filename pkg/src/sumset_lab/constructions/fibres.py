"""Fibre-family construction for sets that nearly fill two intervals.

Both sets are moved to the integer line (no wraparound), cut into residue
fibres mod d = floor(c2 / (k+1)), and two random families are drawn:

F  from every "full enough" fibre of Y, k points that always include the
   fibre's minimum and maximum (a stand-in for the black-box family of the
   interval Cauchy-Davenport refinement);
G  the largest fibre X^0 plus t fibres drawn from the "very full" ones.

A sampled pair (G, F) is topped up with at most d extra points per side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import BudgetExceedsSet, BudgetTooSmall, HypothesisViolated
from ..kernel import as_fraction, sumset
from ..rng import as_rng
from ..witness import McEstimate, WitnessResult, augment_witness, estimate_from_samples
from ..zp import IntervalZp, ZpSet, line


@dataclass(frozen=True)
class ConstructionParams:
    k: int = 4
    t: int = 6
    gamma: Fraction = Fraction(1, 20)
    gamma_prime: Fraction | None = None  # defaults to 100 * gamma
    alpha: Fraction = Fraction(1, 2)
    c: int = 8
    max_samples: int = 16
    theoretical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_fraction(self.gamma))
        object.__setattr__(self, "alpha", as_fraction(self.alpha))
        if self.gamma_prime is None:
            object.__setattr__(self, "gamma_prime", 100 * self.gamma)
        else:
            object.__setattr__(self, "gamma_prime", as_fraction(self.gamma_prime))
        if self.k < 2:
            raise ValueError("k must be >= 2 (each fibre sample keeps both endpoints)")
        if self.t < 0 or self.c < 1 or self.max_samples < 1:
            raise ValueError("t >= 0, c >= 1 and max_samples >= 1 required")
        if not (0 < self.alpha <= 1) or self.gamma < 0:
            raise ValueError("need 0 < alpha <= 1 and gamma >= 0")
        if self.theoretical:
            gp = self.gamma_prime
            k = max(self.k, math.ceil(100 / gp))
            t = theoretical_t(self.alpha, gp)
            object.__setattr__(self, "k", k)
            object.__setattr__(self, "t", t)
            object.__setattr__(self, "gamma", gp / 100)
            object.__setattr__(self, "c", 2**5 * t * (k + 1))

    def d_for(self, c2: int) -> int:
        return c2 // (self.k + 1)

    def to_dict(self) -> dict:
        return {"k": self.k, "t": self.t, "gamma": str(self.gamma), "gamma_prime": str(self.gamma_prime),
                "alpha": str(self.alpha), "c": self.c, "max_samples": self.max_samples,
                "theoretical": self.theoretical}


def theoretical_t(alpha, gamma_prime) -> int:
    """ceil(log_{2/3}(1 - (1 + alpha*gamma'/100)^-1))."""
    u = float(as_fraction(alpha) * as_fraction(gamma_prime) / 100)
    return math.ceil(math.log(u / (1 + u)) / math.log(2 / 3))


@dataclass(frozen=True)
class FibreFamilies:
    d: int
    E_X: tuple[int, ...]
    E_Y: tuple[int, ...]
    E_X_prime: tuple[int, ...]
    E_Y_prime: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"d": self.d, "E_X": list(self.E_X), "E_Y": list(self.E_Y),
                "E_X_prime": list(self.E_X_prime), "E_Y_prime": list(self.E_Y_prime)}


def fibre_families(x_sizes, y_sizes, len_i: int, len_j: int, gamma_prime) -> FibreFamilies:
    """Residues whose fibres clear |I|/d - (g'/3d) min and |I|/d - (g'/10d) min (exact)."""
    d = len(x_sizes)
    gp = as_fraction(gamma_prime)
    m = min(len_i, len_j)

    def members(sizes, length, div):
        # |S^x| >= length/d - (gp/(div d)) m  <=>  div*d*|S^x| >= div*length - gp*m
        bound = div * length - gp * m
        return tuple(int(x) for x in range(d) if div * d * int(sizes[x]) >= bound)

    return FibreFamilies(d, members(x_sizes, len_i, 3), members(y_sizes, len_j, 3),
                         members(x_sizes, len_i, 10), members(y_sizes, len_j, 10))


@dataclass
class _Normalised:
    """Both sets moved onto the integer line with the maximal X fibre at residue 0."""

    ctx: object
    xs: np.ndarray
    ys: np.ndarray
    shift_x: int  # original = (normalised - shift_x) [mod p]
    shift_y: int
    d: int
    x_fibres: list
    y_fibres: list
    families: FibreFamilies
    t_used: int
    swapped: bool
    c1: int
    c2: int


def _check_hypotheses(x: ZpSet, y: ZpSet, I: IntervalZp, J: IntervalZp, params: ConstructionParams):
    if not (x <= I.to_set()) or not (y <= J.to_set()):
        raise HypothesisViolated("X must lie in I and Y in J")
    if x.ctx.is_modp and len(I) + len(J) > x.ctx.modulus:
        raise HypothesisViolated(f"|I|+|J| = {len(I) + len(J)} exceeds p")
    a = params.alpha
    if not (a * len(J) <= len(I) <= len(J) / a):
        raise HypothesisViolated(f"interval ratio |I|={len(I)}, |J|={len(J)} outside alpha={a}")
    holes = max(len(I) - len(x), len(J) - len(y))
    if holes > params.gamma * min(len(I), len(J)):
        raise HypothesisViolated(f"{holes} holes exceed gamma*min = {float(params.gamma * min(len(I), len(J))):.3f}")


def _to_line(s: ZpSet, left: int) -> np.ndarray:
    arr = s.array() - left
    return np.sort(arr % s.ctx.modulus) if s.ctx.is_modp else arr


def _normalise(x, y, I, J, budget, params) -> _Normalised:
    c1, c2 = map(int, budget)
    if x.ctx != y.ctx:
        raise HypothesisViolated("X and Y live in different contexts")
    if not (1 <= c1 <= len(x)) or not (1 <= c2 <= len(y)):
        raise BudgetExceedsSet(f"budget ({c1}, {c2}) vs sizes ({len(x)}, {len(y)})")
    _check_hypotheses(x, y, I, J, params)
    if c1 * c2 < params.c * max(len(x), len(y)):
        raise BudgetTooSmall(f"c1*c2 = {c1 * c2} < c*max = {params.c * max(len(x), len(y))}")
    swapped = c1 < c2
    if swapped:
        x, y, I, J, c1, c2 = y, x, J, I, c2, c1
    d = params.d_for(c2)
    if d < 1:
        raise BudgetTooSmall(f"d = floor({c2}/{params.k + 1}) = 0")
    xs, ys = _to_line(x, I.left), _to_line(y, J.left)
    sizes = np.bincount(xs % d, minlength=d)
    best = sizes.max()
    # smallest translate t >= 0 moving a maximal fibre onto residue 0
    t = min((-r) % d for r in np.flatnonzero(sizes == best))
    xs = xs + t
    ctx = line(len(I) + len(J) + d)
    x_fib = [xs[xs % d == r] for r in range(d)]
    y_fib = [ys[ys % d == r] for r in range(d)]
    fam = fibre_families([len(f) for f in x_fib], [len(f) for f in y_fib], len(I), len(J), params.gamma_prime)
    room = c1 - d
    if len(x_fib[0]) > room:
        raise BudgetTooSmall(f"largest fibre {len(x_fib[0])} exceeds c1 - d = {room}")
    widest = max((len(x_fib[r]) for r in fam.E_X_prime), default=0)
    t_used = params.t if widest == 0 else min(params.t, (room - len(x_fib[0])) // widest)
    return _Normalised(ctx, xs, ys, I.left - t, J.left, d, x_fib, y_fib, fam, t_used, swapped, c1, c2)


def _sample_f(nz: _Normalised, k: int, rng) -> np.ndarray:
    parts = []
    for r in nz.families.E_Y:
        fib = nz.y_fibres[r]
        if len(fib) <= k:
            parts.append(fib)
        else:
            mid = rng.choice(fib[1:-1], size=k - 2, replace=False)
            parts.append(np.concatenate(([fib[0], fib[-1]], mid)))
    return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def _sample_g(nz: _Normalised, rng) -> np.ndarray:
    pool = nz.families.E_X_prime
    parts = [nz.x_fibres[0]]
    if pool and nz.t_used:
        for r in rng.choice(np.asarray(pool), size=nz.t_used, replace=True):
            parts.append(nz.x_fibres[int(r)])
    return np.unique(np.concatenate(parts))


def _back(nz: _Normalised, arr: np.ndarray, shift: int, ctx) -> ZpSet:
    out = arr + shift
    if ctx.is_modp:
        out = np.sort(out % ctx.modulus)
    return ZpSet.from_array(ctx, out)


@dataclass(frozen=True)
class Thm5Result:
    g_sample: ZpSet
    f_sample: ZpSet
    witness: WitnessResult
    pre_augment: int
    target: int
    d: int
    t_used: int
    families: FibreFamilies
    swapped: bool
    samples_used: int

    def __iter__(self):
        return iter((self.g_sample, self.f_sample, self.witness))

    @property
    def found(self) -> bool:
        return self.witness.achieved >= self.target

    def to_dict(self) -> dict:
        return {"found": self.found, "target": self.target, "pre_augment": self.pre_augment,
                "achieved": self.witness.achieved, "d": self.d, "t_used": self.t_used,
                "swapped": self.swapped, "samples_used": self.samples_used,
                "a_sub": list(self.witness.a_sub.elements()), "b_sub": list(self.witness.b_sub.elements()),
                "families": self.families.to_dict()}


def thm5_construct(x: ZpSet, y: ZpSet, I: IntervalZp, J: IntervalZp, budget,
                   params: ConstructionParams | None = None, rng=None) -> Thm5Result:
    """Witness (X', Y') with |X'| <= c1, |Y'| <= c2 aiming at |X'+Y'| >= |X|+|Y|-1.

    Draws up to ``params.max_samples`` (G, F) pairs, stopping early once one
    reaches |X|+|Y|-d, then tops the best one up with at most d points per side.
    Results are returned in the caller's coordinates and operand order.
    """
    params = params or ConstructionParams()
    rng, seed = as_rng(rng)
    nz = _normalise(x, y, I, J, budget, params)
    xs_set = ZpSet.from_array(nz.ctx, nz.xs)
    ys_set = ZpSet.from_array(nz.ctx, nz.ys)
    target = len(x) + len(y) - 1
    best = None
    used = 0
    for used in range(1, params.max_samples + 1):
        g = ZpSet.from_array(nz.ctx, _sample_g(nz, rng))
        f = ZpSet.from_array(nz.ctx, _sample_f(nz, params.k, rng))
        got = len(sumset(g, f))
        if best is None or got > best[0]:
            best = (got, g, f)
        if got >= target - nz.d + 1:
            break
    got, g, f = best
    partial = WitnessResult(g, f, got, target, used, seed)
    full = augment_witness(xs_set, ys_set, partial, nz.d, target, strict=False)
    a_sub, b_sub = full.a_sub, full.b_sub
    gx, fy = g, f
    if nz.swapped:
        # undo the role swap: the caller's X sits on the J side
        a_sub, b_sub = b_sub, a_sub
        gx, fy = f, g
        sx, sy = nz.shift_y, nz.shift_x
    else:
        sx, sy = nz.shift_x, nz.shift_y
    ctx = x.ctx
    out_a = _back(nz, a_sub.array(), sx, ctx)
    out_b = _back(nz, b_sub.array(), sy, ctx)
    witness = WitnessResult(out_a, out_b, full.achieved, target, used, seed)
    if nz.swapped:
        g_out, f_out = _back(nz, gx.array(), sy, ctx), _back(nz, fy.array(), sx, ctx)
    else:
        g_out, f_out = _back(nz, gx.array(), sx, ctx), _back(nz, fy.array(), sy, ctx)
    return Thm5Result(g_out, f_out, witness, got, target, nz.d, nz.t_used, nz.families, nz.swapped, used)


@dataclass(frozen=True)
class FGCheck:
    estimate: McEstimate
    target: int  # |X| + |Y| - d
    flag: bool
    d: int
    fibre_mean: np.ndarray = field(repr=False)
    fibre_se: np.ndarray = field(repr=False)
    fibre_bound: np.ndarray = field(repr=False)  # |X^z| + |Y^z| - 1

    @property
    def fibre_ok(self) -> np.ndarray:
        return self.fibre_mean + 3 * self.fibre_se >= self.fibre_bound

    def to_dict(self) -> dict:
        return {"mean": self.estimate.mean, "std_error": self.estimate.std_error, "trials": self.estimate.trials,
                "target": self.target, "flag": self.flag, "d": self.d,
                "fibre_ok_fraction": float(self.fibre_ok.mean())}


def lemma_fg_expectation_check(x: ZpSet, y: ZpSet, I: IntervalZp, J: IntervalZp, budget,
                               params: ConstructionParams | None = None, trials: int = 1000, rng=None) -> FGCheck:
    """Monte Carlo E|X'+Y'| over the families G x F, overall and per fibre mod d.

    Flag: mean + 3 SE >= |X|+|Y|-d. Fibres are those of the normalised
    (translated) coordinates, so |X^z| refers to the translated X.
    """
    params = params or ConstructionParams()
    rng, seed = as_rng(rng)
    nz = _normalise(x, y, I, J, budget, params)
    d = nz.d
    totals = np.empty(trials, dtype=np.int64)
    per_fibre = np.empty((trials, d), dtype=np.int64)
    for i in range(trials):
        g = ZpSet.from_array(nz.ctx, _sample_g(nz, rng))
        f = ZpSet.from_array(nz.ctx, _sample_f(nz, params.k, rng))
        arr = sumset(g, f).array()
        totals[i] = len(arr)
        per_fibre[i] = np.bincount(arr % d, minlength=d)
    est = estimate_from_samples(totals, seed, mode="families")
    target = len(x) + len(y) - d
    xb = np.array([len(f) for f in nz.x_fibres])
    yb = np.array([len(f) for f in nz.y_fibres])
    return FGCheck(est, target, est.upper() >= target, d, per_fibre.mean(axis=0),
                   per_fibre.std(axis=0) / math.sqrt(trials), xb + yb - 1)
