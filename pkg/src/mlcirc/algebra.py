"""Exact arithmetic over prime fields and the rationals, and dense exact
linear algebra (rank, nullspace) on top of it.

Over F_p the elimination runs in the compiled kernel (see ``kernels``);
F_2 uses rows packed into Python ints; over Q the rank of the
integer-scaled matrix is taken modulo enough primes to beat its Hadamard
bound, which makes the answer exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from mlcirc import kernels
from mlcirc.errors import DomainError, ResourceError, UnsupportedContextError

# Deterministic for every n < 3.3e24 (covers 2**64).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin."""
    if n < 2:
        return False
    for q in _MR_WITNESSES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def prime_sieve(limit: int) -> np.ndarray:
    """Boolean array ``a`` with ``a[k]`` true iff k is prime, for 0 <= k <= limit."""
    if limit < 0:
        return np.zeros(0, dtype=bool)
    a = np.ones(limit + 1, dtype=bool)
    a[:2] = False
    for q in range(2, math.isqrt(limit) + 1):
        if a[q]:
            a[q * q :: q] = False
    return a


def largest_prime_4p_le(n: int) -> int:
    """Largest prime p with 4p <= n."""
    if n < 8:
        raise DomainError(f"need n >= 8, got {n}")
    if n % 2:
        raise DomainError(f"n must be even, got {n}")
    sieve = prime_sieve(n // 4)
    return int(np.flatnonzero(sieve)[-1])


@dataclass(frozen=True)
class FieldCtx:
    """F_p when ``p`` is set, Q when ``p`` is None.

    Elements are canonical ints in [0, p) or ``Fraction`` in lowest terms.
    """

    p: int | None = None

    def __post_init__(self):
        if self.p is not None and not is_prime(self.p):
            raise DomainError(f"modulus {self.p} is not prime")

    @classmethod
    def prime(cls, p: int) -> "FieldCtx":
        return cls(int(p))

    @classmethod
    def rational(cls) -> "FieldCtx":
        return cls(None)

    @property
    def kind(self) -> str:
        return "rational" if self.p is None else "prime"

    @property
    def is_prime_field(self) -> bool:
        return self.p is not None

    def __call__(self, x) -> int | Fraction:
        """Coerce an int, Fraction or decimal/fraction string into the field."""
        if isinstance(x, str):
            x = Fraction(x.strip())
        if self.p is None:
            return Fraction(x)
        if isinstance(x, Fraction):
            if x.denominator % self.p == 0:
                raise DomainError(f"{x} has no image in F_{self.p}")
            return x.numerator * pow(x.denominator, -1, self.p) % self.p
        return int(x) % self.p

    zero = property(lambda self: 0 if self.p is not None else Fraction(0))
    one = property(lambda self: 1 if self.p is not None else Fraction(1))

    def add(self, a, b):
        return (a + b) % self.p if self.p is not None else a + b

    def sub(self, a, b):
        return (a - b) % self.p if self.p is not None else a - b

    def mul(self, a, b):
        return a * b % self.p if self.p is not None else a * b

    def neg(self, a):
        return -a % self.p if self.p is not None else -a

    def inv(self, a):
        if not a:
            raise ZeroDivisionError("inverse of zero")
        return pow(a, -1, self.p) if self.p is not None else 1 / a

    def to_str(self, a) -> str:
        return str(a)

    def to_json(self):
        return {"p": self.p} if self.p is not None else "rational"

    @classmethod
    def from_json(cls, obj) -> "FieldCtx":
        if obj == "rational":
            return cls.rational()
        if isinstance(obj, dict) and "p" in obj:
            return cls.prime(int(obj["p"]))
        raise DomainError(f"bad field descriptor {obj!r}")

    @classmethod
    def parse(cls, text: str) -> "FieldCtx":
        """CLI form: ``rational``/``Q`` or a prime such as ``101``."""
        if text.lower() in ("rational", "q"):
            return cls.rational()
        return cls.prime(int(text))

    def __str__(self):
        return "Q" if self.p is None else f"F_{self.p}"


@dataclass(frozen=True)
class ExactMatrix:
    rows: int
    cols: int
    entries: tuple
    ctx: FieldCtx = field(default_factory=FieldCtx.rational)

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise DomainError(f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], ctx: FieldCtx, cols: int | None = None) -> "ExactMatrix":
        rows = [list(r) for r in rows]
        ncols = cols if cols is not None else (len(rows[0]) if rows else 0)
        if any(len(r) != ncols for r in rows):
            raise DomainError("ragged rows")
        return cls(len(rows), ncols, tuple(ctx(x) for r in rows for x in r), ctx)

    @classmethod
    def zeros(cls, rows: int, cols: int, ctx: FieldCtx) -> "ExactMatrix":
        return cls(rows, cols, (ctx.zero,) * (rows * cols), ctx)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def to_rows(self) -> list[list]:
        c = self.cols
        return [list(self.entries[i * c : (i + 1) * c]) for i in range(self.rows)]

    def transpose(self) -> "ExactMatrix":
        r, c = self.rows, self.cols
        return ExactMatrix(c, r, tuple(self.entries[i * c + j] for j in range(c) for i in range(r)), self.ctx)

    def nonzero_count(self) -> int:
        return sum(1 for x in self.entries if x)

    def as_int_array(self) -> np.ndarray:
        if not self.ctx.is_prime_field:
            raise UnsupportedContextError("integer array view needs a prime field")
        dtype = np.int64 if self.ctx.p < kernels.MAX_KERNEL_PRIME else object
        return np.array(self.entries, dtype=dtype).reshape(self.rows, self.cols)


def _pack_rows_gf2(rows: Iterable[Sequence[int]]) -> list[int]:
    packed = []
    for r in rows:
        v = 0
        for j, x in enumerate(r):
            if x & 1:
                v |= 1 << j
        packed.append(v)
    return packed


def _rank_gf2(packed: list[int]) -> int:
    # pivot on lowest set bit; basis kept in a dict keyed by pivot bit
    basis: dict[int, int] = {}
    for v in packed:
        while v:
            low = v & -v
            b = basis.get(low)
            if b is None:
                basis[low] = v
                break
            v ^= b
    return len(basis)


def _rank_bareiss(rows: list[list[int]]) -> int:
    m = [r[:] for r in rows]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    r = 0
    prev = 1
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pr = m[r]
        pv = pr[c]
        for i in range(r + 1, nrows):
            ri = m[i]
            f = ri[c]
            if f:
                m[i] = [(pv * x - f * y) // prev for x, y in zip(ri, pr)]
            elif pv != prev:
                m[i] = [(pv * x) // prev for x in ri]
        prev = pv
        r += 1
    return r


def _integer_rows(rows: Sequence[Sequence]) -> list[list[int]]:
    # scale each row by the lcm of its denominators; rank is unchanged
    out = []
    for row in rows:
        pairs = [(x.numerator, x.denominator) for x in row]
        den = math.lcm(*(d for _, d in pairs))
        out.append([a * (den // d) for a, d in pairs] if den > 1 else [a for a, _ in pairs])
    return out


@lru_cache(maxsize=1)
def _modular_primes() -> tuple[int, ...]:
    """Primes just below 2^31, largest first (enough for ~25k-bit bounds)."""
    out = []
    q = kernels.MAX_KERNEL_PRIME - 1
    while len(out) < 800:
        if is_prime(q):
            out.append(q)
        q -= 2
    return tuple(out)


def rank_integer(a) -> int:
    """Exact rank over Q of an integer matrix (int64 or object array) by several primes.

    rank mod p never exceeds the rank over Q, and equals it unless p
    divides a fixed nonzero r x r minor D. |D| is at most the product of
    the r largest row norms (Hadamard), so once the product of the primes
    used exceeds that bound at least one prime reports the true rank.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.size == 0:
        return 0
    full = min(a.shape)
    if a.dtype != object and int(np.abs(a).max()) < (1 << 24):
        norms2 = (a * a).sum(axis=1).tolist()  # < 2^60, exact in int64
    else:
        a = a.astype(object)
        norms2 = [int(v) for v in (a * a).sum(axis=1)]
    bound2 = 1
    for v in sorted(norms2, reverse=True)[:full]:
        if v:
            bound2 *= v
    best = 0
    prod = 1
    for p in _modular_primes():
        best = max(best, kernels.rank_modp(np.mod(a, p).astype(np.int64), p))
        prod *= p
        if best == full or prod * prod > bound2:
            return best
    raise ResourceError("Hadamard bound exceeds the prime table")


def _rank_integer(rows: list[list[int]]) -> int:
    small = all(abs(x) < (1 << 62) for r in rows for x in r)
    return rank_integer(np.array(rows, dtype=np.int64 if small else object))


def rank(m: ExactMatrix) -> int:
    """Exact rank over ``m.ctx``."""
    if m.rows == 0 or m.cols == 0:
        return 0
    p = m.ctx.p
    if p == 2:
        return _rank_gf2(_pack_rows_gf2(m.to_rows()))
    if p is not None:
        return kernels.rank_modp(m.as_int_array(), p)
    return _rank_integer(_integer_rows(m.to_rows()))


def rank_bareiss(m: ExactMatrix) -> int:
    """Fraction-free elimination over Q; slow, kept as an independent oracle."""
    if m.rows == 0 or m.cols == 0:
        return 0
    return _rank_bareiss(_integer_rows(m.to_rows()))


def rank_rows(rows: Sequence[Sequence], ctx: FieldCtx) -> int:
    """Rank of a list-of-rows matrix whose entries are already canonical in ``ctx``."""
    if not rows or not len(rows[0]):
        return 0
    if ctx.p == 2:
        return _rank_gf2(_pack_rows_gf2(rows))
    if ctx.p is not None:
        dtype = np.int64 if ctx.p < kernels.MAX_KERNEL_PRIME else object
        return kernels.rank_modp(np.array(rows, dtype=dtype), ctx.p)
    return _rank_integer(_integer_rows(rows))


def nullspace_modp(a: np.ndarray, p: int) -> np.ndarray:
    """Columns spanning {v : a v = 0 mod p}, one per free column of the RREF."""
    cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    rref, pivots = kernels.rref_modp(a, p)
    pivots = list(pivots)
    free = [j for j in range(cols) if j not in set(pivots)]
    basis = np.zeros((cols, len(free)), dtype=np.int64)
    for k, j in enumerate(free):
        basis[j, k] = 1
        for r, pc in enumerate(pivots):
            basis[pc, k] = int(-rref[r, j]) % p
    return basis


def nullspace_basis(m: ExactMatrix) -> list[tuple[int, ...]]:
    """Basis of {v : m v = 0} over F_p, one vector per free column."""
    if not m.ctx.is_prime_field:
        raise UnsupportedContextError("nullspace is only provided over prime fields")
    if m.rows == 0:
        return [tuple(1 if j == k else 0 for j in range(m.cols)) for k in range(m.cols)]
    basis = nullspace_modp(m.as_int_array(), m.ctx.p)
    return [tuple(int(x) for x in basis[:, k]) for k in range(basis.shape[1])]


def mat_vec(m: ExactMatrix, v: Sequence) -> list:
    ctx = m.ctx
    out = []
    for row in m.to_rows():
        acc = ctx.zero
        for a, b in zip(row, v):
            if a and b:
                acc = ctx.add(acc, ctx.mul(a, b))
        out.append(acc)
    return out


@lru_cache(maxsize=None)
def binom(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0
