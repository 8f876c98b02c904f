"""Sparse multilinear polynomials keyed by variable-subset bitmasks, and
their partial derivative matrices.

Variables are 1-based in the public API and in files; bit ``i-1`` of a
monomial mask stands for ``x_i``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from mlcirc import kernels
from mlcirc.algebra import ExactMatrix, FieldCtx, rank_integer, rank_rows
from mlcirc.errors import DomainError


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << (i - 1)
    return m


def indices_of(mask: int) -> list[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return mask.bit_count()


@dataclass(frozen=True)
class MultilinearPoly:
    n: int
    ctx: FieldCtx
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        full = 1 << self.n
        for m, c in self.terms.items():
            if not c:
                raise DomainError("zero coefficient stored")
            if m < 0 or m >= full:
                raise DomainError(f"monomial mask {m:#x} outside {self.n} variables")

    # -- constructors -------------------------------------------------
    @classmethod
    def from_terms(cls, n: int, ctx: FieldCtx, terms) -> "MultilinearPoly":
        """Build from (mask, coef) pairs or a dict; coefficients are summed and reduced."""
        items = terms.items() if isinstance(terms, dict) else terms
        acc: dict[int, object] = {}
        for m, c in items:
            c = ctx(c)
            acc[m] = ctx.add(acc[m], c) if m in acc else c
        return cls(n, ctx, {m: c for m, c in sorted(acc.items()) if c})

    @classmethod
    def zero(cls, n: int, ctx: FieldCtx) -> "MultilinearPoly":
        return cls(n, ctx, {})

    @classmethod
    def constant(cls, n: int, ctx: FieldCtx, c) -> "MultilinearPoly":
        c = ctx(c)
        return cls(n, ctx, {0: c} if c else {})

    @classmethod
    def var(cls, n: int, ctx: FieldCtx, i: int) -> "MultilinearPoly":
        if not 1 <= i <= n:
            raise DomainError(f"variable x{i} outside 1..{n}")
        return cls(n, ctx, {1 << (i - 1): ctx.one})

    # -- structure ------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((popcount(m) for m in self.terms), default=0)

    def support(self) -> int:
        """Mask of variables that occur in some monomial."""
        s = 0
        for m in self.terms:
            s |= m
        return s

    def __eq__(self, other):
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        return self.n == other.n and self.ctx == other.ctx and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, self.ctx, tuple(sorted(self.terms.items()))))

    def _check_compat(self, other: "MultilinearPoly"):
        if self.n != other.n or self.ctx != other.ctx:
            raise DomainError("polynomials over different variable sets or fields")

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        self._check_compat(other)
        ctx = self.ctx
        acc = dict(self.terms)
        for m, c in other.terms.items():
            v = ctx.add(acc[m], c) if m in acc else c
            if v:
                acc[m] = v
            else:
                acc.pop(m, None)
        return MultilinearPoly(self.n, ctx, dict(sorted(acc.items())))

    def __neg__(self) -> "MultilinearPoly":
        return MultilinearPoly(self.n, self.ctx, {m: self.ctx.neg(c) for m, c in self.terms.items()})

    def __sub__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        return self + (-other)

    def scale(self, a) -> "MultilinearPoly":
        a = self.ctx(a)
        if not a:
            return MultilinearPoly.zero(self.n, self.ctx)
        return MultilinearPoly(self.n, self.ctx, {m: self.ctx.mul(c, a) for m, c in self.terms.items()})

    def _product(self, other: "MultilinearPoly", boolean: bool) -> "MultilinearPoly":
        self._check_compat(other)
        ctx = self.ctx
        acc: dict[int, object] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                if m1 & m2 and not boolean:
                    raise DomainError("product is not multilinear (shared variable)")
                m = m1 | m2
                v = ctx.mul(c1, c2)
                acc[m] = ctx.add(acc[m], v) if m in acc else v
        return MultilinearPoly(self.n, ctx, {m: c for m, c in sorted(acc.items()) if c})

    def __mul__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        """Product; raises unless every pair of multiplied monomials is variable-disjoint."""
        return self._product(other, boolean=False)

    def mul_boolean(self, other: "MultilinearPoly") -> "MultilinearPoly":
        """Product reduced by x_i^2 = x_i (agrees with the true product on {0,1}^n)."""
        return self._product(other, boolean=True)

    # -- evaluation / calculus -------------------------------------------
    def eval(self, point: Sequence) -> object:
        if len(point) != self.n:
            raise DomainError(f"point has {len(point)} coordinates, expected {self.n}")
        ctx = self.ctx
        pt = [ctx(x) for x in point]
        acc = ctx.zero
        for m, c in self.terms.items():
            v = c
            i = 0
            while m and v:
                if m & 1:
                    v = ctx.mul(v, pt[i])
                m >>= 1
                i += 1
            if v:
                acc = ctx.add(acc, v)
        return acc

    def eval_indicator(self, mask: int) -> object:
        """Value at the 0/1 point 1_S for the variable set ``mask``."""
        ctx = self.ctx
        acc = ctx.zero
        for m, c in self.terms.items():
            if m & ~mask == 0:
                acc = ctx.add(acc, c)
        return acc

    def restrict(self, i: int, value) -> "MultilinearPoly":
        """Substitute x_i := value."""
        if not 1 <= i <= self.n:
            raise DomainError(f"variable x{i} outside 1..{self.n}")
        ctx = self.ctx
        value = ctx(value)
        bit = 1 << (i - 1)
        acc: dict[int, object] = {}
        for m, c in self.terms.items():
            if m & bit:
                c = ctx.mul(c, value)
                m ^= bit
            if c:
                acc[m] = ctx.add(acc[m], c) if m in acc else c
        return MultilinearPoly(self.n, ctx, {m: c for m, c in sorted(acc.items()) if c})

    def derivative(self, i: int) -> "MultilinearPoly":
        """d f / d x_i."""
        if not 1 <= i <= self.n:
            raise DomainError(f"variable x{i} outside 1..{self.n}")
        bit = 1 << (i - 1)
        return MultilinearPoly(self.n, self.ctx, {m ^ bit: c for m, c in self.terms.items() if m & bit})

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "field": self.ctx.to_json(),
            "terms": [{"vars": indices_of(m), "coef": self.ctx.to_str(c)} for m, c in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MultilinearPoly":
        n = int(obj["n"])
        ctx = FieldCtx.from_json(obj["field"])
        pairs = []
        for t in obj["terms"]:
            vs = [int(v) for v in t["vars"]]
            if len(set(vs)) != len(vs):
                raise DomainError(f"repeated variable in monomial {vs}")
            if any(not 1 <= v <= n for v in vs):
                raise DomainError(f"variable index out of range in {vs}")
            pairs.append((mask_of(vs), t["coef"]))
        return cls.from_terms(n, ctx, pairs)

    def dumps(self, canonical: bool = True) -> str:
        if canonical:
            return json.dumps(self.to_json(), separators=(",", ":"))
        return json.dumps(self.to_json(), indent=2)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}" for i in indices_of(m))
            parts.append(f"{c}" if not mono else (mono if c == 1 else f"{c}*{mono}"))
        return " + ".join(parts)


@dataclass(frozen=True)
class Partition:
    """Split of the n variables into Y (``y_mask``) and its complement Z."""

    n: int
    y_mask: int

    def __post_init__(self):
        if self.y_mask < 0 or self.y_mask >> self.n:
            raise DomainError("Y is not a subset of [n]")

    @classmethod
    def from_indices(cls, n: int, ys: Iterable[int]) -> "Partition":
        return cls(n, mask_of(ys))

    @property
    def z_mask(self) -> int:
        return ((1 << self.n) - 1) & ~self.y_mask

    @property
    def is_balanced(self) -> bool:
        return 2 * popcount(self.y_mask) == self.n

    def swapped(self) -> "Partition":
        return Partition(self.n, self.z_mask)


def compress(mask: int, within: int) -> int:
    """Index of ``mask`` (a subset of ``within``) in the compressed coordinates of ``within``."""
    out = 0
    bit = 0
    while within:
        low = within & -within
        if mask & low:
            out |= 1 << bit
        bit += 1
        within ^= low
    return out


@dataclass(frozen=True)
class PdMatrix:
    partition: Partition
    matrix: ExactMatrix

    def entry(self, m1: int, m2: int):
        """Coefficient of the monomial m1*m2 (m1 over Y, m2 over Z, both as global masks)."""
        p = self.partition
        return self.matrix[compress(m1, p.y_mask), compress(m2, p.z_mask)]


TABLE_BITS = 16


@lru_cache(maxsize=256)
def _compress_array(n: int, within: int) -> np.ndarray:
    """compress(m & within, within) for every m < 2^n."""
    masks = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(1 << n, dtype=np.int64)
    k = 0
    for j in range(n):
        if within >> j & 1:
            out |= ((masks >> j) & 1) << k
            k += 1
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def _compress_table(n: int, within: int) -> tuple[int, ...]:
    return tuple(_compress_array(n, within).tolist())


def _scatter(f: MultilinearPoly, part: Partition):
    ym, zm = part.y_mask, part.z_mask
    nr, nc = 1 << popcount(ym), 1 << popcount(zm)
    rows = [[f.ctx.zero] * nc for _ in range(nr)]
    if f.n <= TABLE_BITS:
        ty, tz = _compress_table(f.n, ym), _compress_table(f.n, zm)
        for m, c in f.terms.items():
            rows[ty[m]][tz[m]] = c
    else:
        for m, c in f.terms.items():
            rows[compress(m & ym, ym)][compress(m & zm, zm)] = c
    return rows


def build_pdm(f: MultilinearPoly, part: Partition) -> PdMatrix:
    if part.n != f.n:
        raise DomainError(f"partition of {part.n} variables for a polynomial in {f.n}")
    rows = _scatter(f, part)
    return PdMatrix(part, ExactMatrix.from_rows(rows, f.ctx, cols=1 << popcount(part.z_mask)))


def rank_yz(f: MultilinearPoly, part: Partition) -> int:
    if part.n != f.n:
        raise DomainError(f"partition of {part.n} variables for a polynomial in {f.n}")
    if f.is_zero():
        return 0
    p = f.ctx.p
    if f.n <= TABLE_BITS:
        if p is None:
            return rank_integer(_integer_pdm(f, part))
        if 2 < p < kernels.MAX_KERNEL_PRIME:
            return kernels.rank_modp(_dense_pdm(f, part, list(f.terms.values()), np.int64), p)
    return rank_rows(_scatter(f, part), f.ctx)


def _dense_pdm(f: MultilinearPoly, part: Partition, vals: list, dtype) -> np.ndarray:
    ms = np.fromiter(f.terms, dtype=np.int64, count=len(f.terms))
    out = np.zeros((1 << popcount(part.y_mask), 1 << popcount(part.z_mask)), dtype=dtype)
    out[_compress_array(f.n, part.y_mask)[ms], _compress_array(f.n, part.z_mask)[ms]] = np.array(vals, dtype=dtype)
    return out


def _integer_pdm(f: MultilinearPoly, part: Partition) -> np.ndarray:
    """The matrix of a rational polynomial scaled by the lcm of its denominators."""
    pairs = [(c.numerator, c.denominator) for c in f.terms.values()]
    den = math.lcm(*(d for _, d in pairs))
    vals = [a * (den // d) for a, d in pairs] if den > 1 else [a for a, _ in pairs]
    return _dense_pdm(f, part, vals, np.int64 if max(map(abs, vals)) < (1 << 62) else object)


# ---------------------------------------------------------------------------
# random instances


def random_poly(n: int, ctx: FieldCtx, rng: random.Random, density: float = 0.5, max_degree: int | None = None,
                support: int | None = None) -> MultilinearPoly:
    """Random multilinear polynomial; each admissible monomial kept with probability ``density``."""
    support = (1 << n) - 1 if support is None else support
    terms = []
    sub = support
    while True:
        if (max_degree is None or popcount(sub) <= max_degree) and rng.random() < density:
            terms.append((sub, _random_coef(ctx, rng)))
        if sub == 0:
            break
        sub = (sub - 1) & support
    return MultilinearPoly.from_terms(n, ctx, terms)


def _random_coef(ctx: FieldCtx, rng: random.Random):
    if ctx.p is not None:
        return rng.randrange(1, ctx.p)
    num = rng.choice([-1, 1]) * rng.randint(1, 9)
    return Fraction(num, rng.randint(1, 4))


# ---------------------------------------------------------------------------
# rank-property checks on a sample


@dataclass
class PropertyReport:
    items: dict = field(default_factory=lambda: {k: {"checked": 0, "passed": True, "witness": None} for k in range(1, 6)})

    def record(self, item: int, ok: bool, witness=None):
        """``witness`` may be a zero-argument callable; it is only built on failure."""
        rec = self.items[item]
        rec["checked"] += 1
        if not ok and rec["passed"]:
            rec["passed"] = False
            rec["witness"] = witness() if callable(witness) else witness

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.items.values())


def _log2_half(n: int) -> float:
    return math.log2(n / 2)


def low_degree_rank_bound(n: int, d: int) -> float:
    """2^{(d+1) log2(n/2)} = (n/2)^(d+1)."""
    return (n / 2) ** (d + 1)


def check_pdm_properties(sample: Sequence[MultilinearPoly], part: Partition, rng: random.Random | None = None,
                         report: PropertyReport | None = None) -> PropertyReport:
    """Check the five partial-derivative-matrix rank properties on ``sample`` under ``part``.

    Item 2 pairs consecutive polynomials; item 3 splits each polynomial's
    variable set at a random point and multiplies restricted copies.
    Items 4 and 5 need a balanced partition and are skipped otherwise.
    """
    rng = rng or random.Random(0)
    report = report or PropertyReport()
    if not sample:
        return report
    n = part.n
    if any(f.n != n or f.ctx != sample[0].ctx for f in sample):
        raise DomainError("sample polynomials must share n and field")
    ny, nz = popcount(part.y_mask), popcount(part.z_mask)
    ranks = [rank_yz(f, part) for f in sample]

    for f, r in zip(sample, ranks):
        report.record(1, r <= min(1 << ny, 1 << nz), lambda: {"poly": f.to_json(), "rank": r})

    for k in range(len(sample)):
        f1, f2 = sample[k], sample[(k + 1) % len(sample)]
        r12 = rank_yz(f1 + f2, part)
        report.record(2, r12 <= ranks[k] + ranks[(k + 1) % len(sample)],
                      lambda: {"f1": f1.to_json(), "f2": f2.to_json(), "rank_sum": r12})

    full = (1 << n) - 1
    for f in sample:
        # disjoint supports: f1 keeps X1, f2 lives on X2 = complement
        x1 = 0
        for i in range(n):
            if rng.random() < 0.5:
                x1 |= 1 << i
        x2 = full & ~x1
        f1 = _project(f, x1)
        f2 = _project(_shuffle_coefs(f, rng), x2)
        p1 = Partition(n, part.y_mask & x1)
        p2 = Partition(n, part.y_mask & x2)
        # rank of f_i under (Y_i, Z_i) equals its rank under (Y, Z) since f_i only uses X_i
        r1 = rank_yz(f1, p1)
        r2 = rank_yz(f2, p2)
        rp = rank_yz(f1 * f2, part)
        report.record(3, rp == r1 * r2, lambda: {"f1": f1.to_json(), "f2": f2.to_json(), "ranks": [r1, r2, rp]})

    if part.is_balanced:
        top = 1 << (n // 2)
        for f, r in zip(sample, ranks):
            if r == top:
                for i in range(1, n + 1):
                    rd = rank_yz(f.derivative(i), part)
                    if rd != top // 2:
                        report.record(4, False, {"poly": f.to_json(), "var": i, "rank": rd})
                        break
                else:
                    report.record(4, True)
            report.record(5, r <= low_degree_rank_bound(n, f.degree()),
                          lambda: {"poly": f.to_json(), "rank": r, "degree": f.degree()})
    return report


def _project(f: MultilinearPoly, keep: int) -> MultilinearPoly:
    """Drop every monomial that uses a variable outside ``keep``."""
    return MultilinearPoly(f.n, f.ctx, {m: c for m, c in f.terms.items() if m & ~keep == 0})


def _shuffle_coefs(f: MultilinearPoly, rng: random.Random) -> MultilinearPoly:
    ms = list(f.terms)
    cs = list(f.terms.values())
    rng.shuffle(cs)
    return MultilinearPoly(f.n, f.ctx, dict(sorted(zip(ms, cs))))


def read_poly(path) -> MultilinearPoly:
    with open(path) as fh:
        return MultilinearPoly.from_json(json.load(fh))
