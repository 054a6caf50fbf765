"""Arithmetic contexts and dense bitset sets over Z_p or a bounded window of Z.

A set is stored as a single Python ``int`` whose bit ``i`` marks membership of
``i``. Shifts and ORs on that integer are word-parallel, which is what the
sumset kernel relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CompositeModulus, ContextMismatch, OutOfRange, ZeroStep, ZeroWindow

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin; exact for every n < 3.3e24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class Mode(str, enum.Enum):
    MOD_P = "modp"
    LINE = "line"


@dataclass(frozen=True)
class Context:
    """Ambient group: Z_p (``MOD_P``) or the integer window [0, W) (``LINE``)."""

    mode: Mode
    modulus: int

    @property
    def p(self) -> int | None:
        return self.modulus if self.mode is Mode.MOD_P else None

    @property
    def is_modp(self) -> bool:
        return self.mode is Mode.MOD_P

    @property
    def mask(self) -> int:
        return (1 << self.modulus) - 1

    def __str__(self) -> str:
        return f"Z_{self.modulus}" if self.is_modp else f"Z[0,{self.modulus})"


def make_context(mode: Mode | str, p_or_window: int) -> Context:
    mode = Mode(mode)
    n = int(p_or_window)
    if mode is Mode.MOD_P:
        if not is_prime(n):
            raise CompositeModulus(f"{n} is not prime")
    elif n < 1:
        raise ZeroWindow(f"window must be >= 1, got {n}")
    return Context(mode, n)


def modp(p: int) -> Context:
    return make_context(Mode.MOD_P, p)


def line(window: int) -> Context:
    return make_context(Mode.LINE, window)


def _bits_from_indices(indices: np.ndarray, n: int) -> int:
    if len(indices) == 0:
        return 0
    flags = np.zeros(n, dtype=np.uint8)
    flags[indices] = 1
    return int.from_bytes(np.packbits(flags, bitorder="little").tobytes(), "little")


def _indices_from_bits(bits: int, n: int) -> np.ndarray:
    if bits == 0:
        return np.zeros(0, dtype=np.int64)
    raw = np.frombuffer(bits.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little")[:n]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ZpSet:
    """Immutable subset of a :class:`Context`, stored as a bitmask."""

    ctx: Context
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.ctx.modulus:
            raise OutOfRange(f"bitmask exceeds {self.ctx}")

    # construction helpers
    @classmethod
    def empty(cls, ctx: Context) -> "ZpSet":
        return cls(ctx, 0)

    @classmethod
    def full(cls, ctx: Context) -> "ZpSet":
        return cls(ctx, ctx.mask)

    @classmethod
    def from_array(cls, ctx: Context, indices) -> "ZpSet":
        """Build from already-canonical indices (no range reduction)."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= ctx.modulus):
            raise OutOfRange(f"element outside {ctx}")
        return cls(ctx, _bits_from_indices(idx, ctx.modulus))

    @property
    def size(self) -> int:
        return self.bits.bit_count()

    def __len__(self) -> int:
        return self.size

    def __bool__(self) -> bool:
        return self.bits != 0

    def array(self) -> np.ndarray:
        """Sorted member array (int64)."""
        return _indices_from_bits(self.bits, self.ctx.modulus)

    def elements(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.array())

    def indicator(self) -> np.ndarray:
        out = np.zeros(self.ctx.modulus, dtype=np.int64)
        out[self.array()] = 1
        return out

    def __iter__(self) -> Iterator[int]:
        return iter(self.elements())

    def __contains__(self, x: int) -> bool:
        return 0 <= x < self.ctx.modulus and (self.bits >> x) & 1 == 1

    def min(self) -> int:
        if not self.bits:
            raise ValueError("min of empty set")
        return (self.bits & -self.bits).bit_length() - 1

    def max(self) -> int:
        if not self.bits:
            raise ValueError("max of empty set")
        return self.bits.bit_length() - 1

    def _check(self, other: "ZpSet") -> None:
        if self.ctx != other.ctx:
            raise ContextMismatch(f"{self.ctx} vs {other.ctx}")

    def __eq__(self, other) -> bool:
        return isinstance(other, ZpSet) and self.ctx == other.ctx and self.bits == other.bits

    def __hash__(self) -> int:
        return hash((self.ctx, self.bits))

    def __or__(self, other: "ZpSet") -> "ZpSet":
        self._check(other)
        return ZpSet(self.ctx, self.bits | other.bits)

    def __and__(self, other: "ZpSet") -> "ZpSet":
        self._check(other)
        return ZpSet(self.ctx, self.bits & other.bits)

    def __sub__(self, other: "ZpSet") -> "ZpSet":
        self._check(other)
        return ZpSet(self.ctx, self.bits & ~other.bits)

    def __xor__(self, other: "ZpSet") -> "ZpSet":
        self._check(other)
        return ZpSet(self.ctx, self.bits ^ other.bits)

    def __le__(self, other: "ZpSet") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def complement(self) -> "ZpSet":
        return ZpSet(self.ctx, self.ctx.mask & ~self.bits)

    def symdiff_size(self, other: "ZpSet") -> int:
        self._check(other)
        return (self.bits ^ other.bits).bit_count()

    def to_csv(self) -> str:
        return serialize(self)

    def __repr__(self) -> str:
        body = self.to_csv()
        if len(body) > 60:
            body = body[:57] + "..."
        return f"ZpSet({self.ctx}, {{{body}}})"


def set_from_elements(ctx: Context, elements: Iterable[int], reduce: bool = False) -> ZpSet:
    """Canonical set from arbitrary integers.

    Strict by default: anything outside [0, modulus) raises ``OutOfRange``.
    With ``reduce=True`` (Z_p only) elements are taken mod p.
    """
    vals = np.fromiter((int(x) for x in elements), dtype=np.int64)
    if reduce and ctx.is_modp:
        vals = np.mod(vals, ctx.modulus)
    elif vals.size and (vals.min() < 0 or vals.max() >= ctx.modulus):
        bad = vals[(vals < 0) | (vals >= ctx.modulus)][0]
        raise OutOfRange(f"{int(bad)} not in {ctx}")
    return ZpSet(ctx, _bits_from_indices(vals, ctx.modulus))


def serialize(s: ZpSet) -> str:
    return ",".join(str(x) for x in s.array())


def parse(ctx: Context, text: str, reduce: bool = False) -> ZpSet:
    text = text.strip()
    if not text:
        return ZpSet.empty(ctx)
    return set_from_elements(ctx, (int(tok) for tok in text.split(",")), reduce=reduce)


def format_instance_line(a: ZpSet, b: ZpSet) -> str:
    """One instance in the canonical file form ``p=<p>;A=<csv>;B=<csv>``."""
    a._check(b)
    head = f"p={a.ctx.modulus}" if a.ctx.is_modp else f"W={a.ctx.modulus}"
    return f"{head};A={serialize(a)};B={serialize(b)}"


def parse_instance_line(line_text: str) -> tuple[Context, ZpSet, ZpSet]:
    fields = {}
    for part in line_text.strip().split(";"):
        key, _, value = part.partition("=")
        fields[key.strip()] = value.strip()
    if "p" in fields:
        ctx = modp(int(fields["p"]))
    elif "W" in fields:
        ctx = line(int(fields["W"]))
    else:
        raise ValueError(f"instance line lacks p= or W=: {line_text!r}")
    return ctx, parse(ctx, fields.get("A", "")), parse(ctx, fields.get("B", ""))


def read_instances(path) -> list[tuple[Context, ZpSet, ZpSet]]:
    with open(path, encoding="utf-8") as fh:
        return [parse_instance_line(ln) for ln in fh if ln.strip() and not ln.startswith("#")]


def write_instances(path, pairs: Sequence[tuple[ZpSet, ZpSet]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in pairs:
            fh.write(format_instance_line(a, b) + "\n")


def translate(s: ZpSet, t: int) -> ZpSet:
    ctx = s.ctx
    if ctx.is_modp:
        t %= ctx.modulus
        if t == 0 or not s.bits:
            return s
        rotated = (s.bits << t) | (s.bits >> (ctx.modulus - t))
        return ZpSet(ctx, rotated & ctx.mask)
    if t >= 0:
        shifted = s.bits << t
        if shifted >> ctx.modulus:
            raise OutOfRange(f"translate by {t} leaves {ctx}")
        return ZpSet(ctx, shifted)
    if s.bits & ((1 << -t) - 1):
        raise OutOfRange(f"translate by {t} leaves {ctx}")
    return ZpSet(ctx, s.bits >> -t)


def dilate(s: ZpSet, lam: int) -> ZpSet:
    """{lam * x mod p}; lam must be a unit of Z_p."""
    ctx = s.ctx
    if not ctx.is_modp:
        raise ValueError("dilation is only defined in Z_p")
    lam %= ctx.modulus
    if lam == 0:
        raise ZeroStep("dilation by 0")
    return ZpSet(ctx, _bits_from_indices((s.array() * lam) % ctx.modulus, ctx.modulus))


def negate(s: ZpSet) -> ZpSet:
    return dilate(s, -1)


@dataclass(frozen=True)
class IntervalZp:
    ctx: Context
    left: int
    length: int

    def __post_init__(self):
        if self.length < 0 or self.length > self.ctx.modulus:
            raise OutOfRange(f"interval length {self.length} in {self.ctx}")
        if not self.ctx.is_modp and (self.left < 0 or self.left + self.length > self.ctx.modulus):
            raise OutOfRange(f"interval [{self.left}, +{self.length}) leaves {self.ctx}")

    @property
    def right(self) -> int:
        """Last element (inclusive), reduced into the context."""
        last = self.left + self.length - 1
        return last % self.ctx.modulus if self.ctx.is_modp else last

    def to_set(self) -> ZpSet:
        block = (1 << self.length) - 1
        if self.ctx.is_modp:
            return translate(ZpSet(self.ctx, block), self.left)
        return ZpSet(self.ctx, block << self.left)

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class ProgressionZp:
    ctx: Context
    start: int
    difference: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise OutOfRange("negative progression length")
        if self.ctx.is_modp:
            if self.difference % self.ctx.modulus == 0 and self.length > 1:
                raise ZeroStep("progression difference must be nonzero")
            if self.length > self.ctx.modulus:
                raise OutOfRange("progression longer than p")

    def to_set(self) -> ZpSet:
        idx = self.start + self.difference * np.arange(self.length, dtype=np.int64)
        if self.ctx.is_modp:
            return ZpSet.from_array(self.ctx, np.mod(idx, self.ctx.modulus))
        return ZpSet.from_array(self.ctx, idx)


@dataclass(frozen=True)
class FibreDecomposition:
    base: ZpSet
    d: int
    fibres: tuple[ZpSet, ...]

    def sizes(self) -> np.ndarray:
        return np.array([len(f) for f in self.fibres], dtype=np.int64)

    def __getitem__(self, x: int) -> ZpSet:
        return self.fibres[x % self.d]


def fibre_sizes(s: ZpSet, d: int) -> np.ndarray:
    if d < 1:
        raise ZeroStep("fibre modulus must be >= 1")
    return np.bincount(s.array() % d, minlength=d).astype(np.int64)


def fibre_decompose(s: ZpSet, d: int) -> FibreDecomposition:
    """Split ``s`` into its residue classes mod ``d`` (canonical representatives)."""
    if d < 1:
        raise ZeroStep("fibre modulus must be >= 1")
    arr = s.array()
    res = arr % d
    fibres = tuple(ZpSet.from_array(s.ctx, arr[res == x]) for x in range(d))
    return FibreDecomposition(s, d, fibres)


def interval(ctx: Context, left: int, length: int) -> ZpSet:
    return IntervalZp(ctx, left, length).to_set()
