"""Balanced partitions, set imbalance, the interval constructions for the
(generalized) Galvin problem, exhaustive covering/unbalancing searches and
exact hypergeometric probabilities.

Sets and partitions are bitmasks over [n] (bit i-1 is element i). Every
imbalance comparison is done on 2*d_Y(S), which is an integer.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from mlcirc import kernels
from mlcirc.errors import DomainError, ResourceError
from mlcirc.rng import stream

EXHAUSTIVE_GUARD = 28
SEARCH_GUARD = 12


def _full(n: int) -> int:
    return (1 << n) - 1


@dataclass(frozen=True)
class SetFamily:
    n: int
    sets: tuple[int, ...]

    def __post_init__(self):
        full = _full(self.n)
        for s in self.sets:
            if s <= 0 or s & ~full:
                raise DomainError(f"set {_elements(s)} is empty or not inside [{self.n}]")
            if s == full:
                raise DomainError("the whole universe is not allowed as a family member")

    @classmethod
    def from_lists(cls, n: int, sets: Iterable[Iterable[int]]) -> "SetFamily":
        return cls(n, tuple(_mask(s) for s in sets))

    def __len__(self):
        return len(self.sets)

    def size_violations(self, tau: int) -> list[int]:
        """Indices of sets violating 2*tau <= |S| <= n - 2*tau."""
        return [j for j, s in enumerate(self.sets) if not 2 * tau <= s.bit_count() <= self.n - 2 * tau]

    def complemented_small(self) -> "SetFamily":
        """Replace every set larger than n/2 by its complement (imbalance is unchanged)."""
        full = _full(self.n)
        return SetFamily(self.n, tuple(full & ~s if 2 * s.bit_count() > self.n else s for s in self.sets))

    def to_json(self) -> dict:
        return {"n": self.n, "sets": [_elements(s) for s in self.sets]}

    @classmethod
    def from_json(cls, obj: dict) -> "SetFamily":
        return cls.from_lists(int(obj["n"]), obj["sets"])

    def as_lists(self) -> list[list[int]]:
        return [_elements(s) for s in self.sets]


@dataclass(frozen=True)
class BalancedPartition:
    n: int
    y_mask: int

    def __post_init__(self):
        _check_even(self.n)
        if self.y_mask & ~_full(self.n) or 2 * self.y_mask.bit_count() != self.n:
            raise DomainError(f"{_elements(self.y_mask)} is not a balanced partition of [{self.n}]")

    @classmethod
    def from_indices(cls, n: int, ys: Iterable[int]) -> "BalancedPartition":
        return cls(n, _mask(ys))

    @property
    def elements(self) -> list[int]:
        return _elements(self.y_mask)

    def to_json(self) -> dict:
        return {"n": self.n, "Y": self.elements}


def _mask(items: Iterable[int]) -> int:
    m = 0
    for i in items:
        m |= 1 << (int(i) - 1)
    return m


def _elements(mask: int) -> list[int]:
    return [i + 1 for i in range(mask.bit_length()) if mask >> i & 1]


def _check_even(n: int):
    if n <= 0 or n % 2:
        raise DomainError(f"universe size must be a positive even number, got {n}")


def imbalance(y: BalancedPartition, s: int) -> Fraction:
    """d_Y(S) = | |Y & S| - |S|/2 |."""
    if s & ~_full(y.n):
        raise DomainError("S is not a subset of [n]")
    return Fraction(abs(2 * (y.y_mask & s).bit_count() - s.bit_count()), 2)


def interval(start: int, length: int) -> int:
    """{start, ..., start+length-1} as a mask (1-based)."""
    return ((1 << length) - 1) << (start - 1)


def galvin_interval_family(gn: int, verify: bool = True) -> SetFamily:
    """The 2gn+1 intervals {i, ..., i+2gn-1} in [4gn].

    With ``verify`` (and 4gn <= 28) every 2gn-subset is checked to
    exactly halve some member.
    """
    if gn < 1:
        raise DomainError("gn must be >= 1")
    n = 4 * gn
    fam = SetFamily(n, tuple(interval(i, 2 * gn) for i in range(1, 2 * gn + 2)))
    if verify and n <= EXHAUSTIVE_GUARD:
        ok, witness = covers(fam, 0, strict=False)
        if not ok:
            raise AssertionError(f"interval family misses {witness}")
    return fam


def interval_tau_family(n: int, tau: int) -> SetFamily:
    """Intervals of length n/2 starting at 1, 1+tau, ..., 1+floor(n/(2 tau))*tau."""
    _check_even(n)
    if not 1 <= tau <= n // 4:
        raise DomainError(f"need 1 <= tau <= n/4, got tau={tau}, n={n}")
    starts = [1 + j * tau for j in range(n // (2 * tau) + 1)]
    return SetFamily(n, tuple(interval(i, n // 2) for i in starts))


# ---------------------------------------------------------------------------
# balanced-partition enumeration (colex order == increasing mask order)


def colex_unrank(r: int, n: int, k: int) -> int:
    """The r-th k-subset of [n] in colex order, as a mask."""
    if not 0 <= r < math.comb(n, k):
        raise DomainError("rank out of range")
    mask = 0
    for i in range(k, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= r:
            c += 1
        mask |= 1 << c
        r -= math.comb(c, i)
    return mask


def colex_rank(mask: int) -> int:
    r = 0
    for i, c in enumerate(_bits(mask), start=1):
        r += math.comb(c, i)
    return r


def _bits(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def balanced_masks(n: int) -> list[int]:
    """All n/2-subsets of [n], in colex order."""
    k = n // 2
    out = []
    y = (1 << k) - 1
    limit = 1 << n
    while y < limit:
        out.append(y)
        low = y & -y
        ripple = y + low
        y = (((ripple ^ y) >> 2) // low) | ripple
    return out


def _scan_first(sets: Sequence[int], n: int, threshold2: int, threads: int = 1) -> tuple[int | None, int]:
    """Colex-least balanced Y with 2*d_Y(S) >= threshold2 for every S."""
    total = math.comb(n, n // 2)
    arr = np.array(sets, dtype=np.uint64)
    threads = max(1, min(threads, total))
    bounds = [total * t // threads for t in range(threads + 1)]
    chunks = [(bounds[t], bounds[t + 1] - bounds[t]) for t in range(threads) if bounds[t + 1] > bounds[t]]

    def run(chunk):
        start, count = chunk
        return kernels.first_unbalancing(arr, n, colex_unrank(start, n, n // 2), count, threshold2)

    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            results = list(ex.map(run, chunks))
    scanned = 0
    for (start, count), (found, done) in zip(chunks, results):
        if found >= 0:
            # lower chunks were scanned completely without success
            return found, scanned + done
        scanned += done
    return None, scanned


def _balance_limit2(tau: int, strict: bool) -> int:
    """Largest 2*d that still counts as tau-balanced."""
    return 2 * tau - 1 if strict else 2 * tau


def covers(fam: SetFamily, tau: int, strict: bool = True, threads: int = 1) -> tuple[bool, BalancedPartition | None]:
    """Whether every balanced partition tau-balances some set (d < tau if
    strict, d <= tau otherwise). On failure returns the colex-least
    partition that balances none of them."""
    n = fam.n
    _check_even(n)
    if n > EXHAUSTIVE_GUARD:
        raise ResourceError(f"exhaustive covering check guarded to n <= {EXHAUSTIVE_GUARD}; use randomized search")
    found, _ = _scan_first(fam.sets, n, _balance_limit2(tau, strict) + 1, threads)
    if found is None:
        return True, None
    y = BalancedPartition(n, found)
    _verify_unbalancing(fam, y, _balance_limit2(tau, strict) + 1)
    return False, y


def _verify_unbalancing(fam: SetFamily, y: BalancedPartition, threshold2: int):
    for s in fam.sets:
        if 2 * imbalance(y, s) < threshold2:
            raise AssertionError(f"witness {y.elements} balances {_elements(s)}")


@dataclass(frozen=True)
class NotFound:
    tried: int

    def __bool__(self):
        return False


def find_unbalancing_partition(fam: SetFamily, tau: int, mode: str = "exhaustive", budget: int = 100_000,
                               seed: int = 0, threads: int = 1) -> BalancedPartition | NotFound:
    """A balanced Y with d_Y(S) >= tau for every S in the family."""
    n = fam.n
    _check_even(n)
    threshold2 = 2 * tau
    if mode == "exhaustive":
        if n > EXHAUSTIVE_GUARD:
            raise ResourceError(f"exhaustive search guarded to n <= {EXHAUSTIVE_GUARD}")
        found, scanned = _scan_first(fam.sets, n, threshold2, threads)
        if found is None:
            return NotFound(scanned)
        y = BalancedPartition(n, found)
    elif mode == "randomized":
        rng = stream(seed, "find_unbalancing_partition")
        sets = [(s, s.bit_count()) for s in fam.sets]
        y = None
        for tried in range(1, budget + 1):
            mask = random_balanced_mask(n, rng)
            if all(abs(2 * (mask & s).bit_count() - k) >= threshold2 for s, k in sets):
                y = BalancedPartition(n, mask)
                break
        if y is None:
            return NotFound(budget)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    _verify_unbalancing(fam, y, threshold2)
    return y


def random_balanced_mask(n: int, rng: np.random.Generator) -> int:
    """Partial Fisher-Yates: the first n/2 positions of a random shuffle."""
    items = list(range(n))
    mask = 0
    for i in range(n // 2):
        j = i + int(rng.integers(n - i))
        items[i], items[j] = items[j], items[i]
        mask |= 1 << items[i]
    return mask


# ---------------------------------------------------------------------------
# minimum covering family (exhaustive, small n)


@dataclass(frozen=True)
class SearchResult:
    m: int | None
    family: SetFamily | None
    candidates: int
    partitions: int
    nodes: int

    @property
    def feasible(self) -> bool:
        return self.m is not None


def _row_to_int(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")


def min_family_search(n: int, tau: int, size_lo: int, size_hi: int, exact_balance: bool = False,
                      strict: bool = True, max_m: int | None = None) -> SearchResult:
    """Smallest m such that some m sets with sizes in [size_lo, size_hi]
    balance every balanced partition, with one witness family.

    Balance means |Y & S| = |S|/2 when ``exact_balance``, else d_Y(S) < tau
    (``strict``) or <= tau. Exhaustive iterative deepening, branching on
    the first uncovered partition; the first set is fixed up to the
    symmetry group of that partition, and later sets are drawn from the
    candidates that are not dominated by another candidate.
    """
    _check_even(n)
    if n > SEARCH_GUARD:
        raise ResourceError(f"family search guarded to n <= {SEARCH_GUARD}")
    limit2 = 0 if exact_balance else _balance_limit2(tau, strict)
    full = _full(n)
    # Y and its complement are the same partition: keep the masks containing element 1
    parts = [y for y in balanced_masks(n) if y & 1]
    cands = [s for s in range(1, full) if size_lo <= s.bit_count() <= size_hi]
    if not cands:
        return SearchResult(None, None, 0, len(parts), 0)
    table = kernels.coverage_table(np.array(cands, dtype=np.uint64), np.array(parts, dtype=np.uint64), limit2)
    cover = {s: _row_to_int(table[i]) for i, s in enumerate(cands)}
    goal = (1 << len(parts)) - 1

    union = 0
    for v in cover.values():
        union |= v
    if union != goal:
        return SearchResult(None, None, len(cands), len(parts), 0)

    # keep one candidate per coverage pattern, then drop strictly dominated patterns
    by_pattern: dict[int, int] = {}
    for s in cands:
        by_pattern.setdefault(cover[s], s)
    patterns = sorted(by_pattern, key=lambda v: -v.bit_count())
    kept: list[int] = []
    for v in patterns:
        if not any(v | w == w for w in kept):
            kept.append(v)
    reduced = sorted((by_pattern[v] for v in kept))
    max_cov = max(cover[s].bit_count() for s in reduced)

    # orbit representatives for the first set under the stabilizer of parts[0]
    p0 = parts[0]
    inside, outside = _bits(p0), _bits(full & ~p0)
    firsts = []
    seen_types = set()
    for s in cands:
        if not cover[s] & 1:
            continue
        a, b = (s & p0).bit_count(), (s & ~p0).bit_count()
        key = (max(a, b), min(a, b))
        if key in seen_types:
            continue
        seen_types.add(key)
        rep = 0
        big, small = (inside, outside) if a >= b else (outside, inside)
        for i in big[: max(a, b)]:
            rep |= 1 << i
        for i in small[: min(a, b)]:
            rep |= 1 << i
        firsts.append(rep)
    firsts.sort()

    nodes = 0

    def dfs(covered: int, left: int, chosen: list[int]) -> list[int] | None:
        nonlocal nodes
        nodes += 1
        if covered == goal:
            return chosen
        if left == 0 or (goal & ~covered).bit_count() > left * max_cov:
            return None
        low = (goal & ~covered) & -(goal & ~covered)
        for s in reduced:
            if cover[s] & low:
                res = dfs(covered | cover[s], left - 1, chosen + [s])
                if res is not None:
                    return res
        return None

    cap = max_m if max_m is not None else len(reduced)
    for m in range(1, cap + 1):
        for s in firsts:
            if s not in cover:
                continue
            res = dfs(cover[s], m - 1, [s])
            if res is not None:
                fam = SetFamily(n, tuple(sorted(res)))
                _verify_cover(fam, limit2)
                return SearchResult(m, fam, len(cands), len(parts), nodes)
    return SearchResult(None, None, len(cands), len(parts), nodes)


def _verify_cover(fam: SetFamily, limit2: int):
    for y in balanced_masks(fam.n):
        if not any(abs(2 * (y & s).bit_count() - s.bit_count()) <= limit2 for s in fam.sets):
            raise AssertionError(f"search witness misses partition {_elements(y)}")


def counting_lower_bound(n: int, tau: int, size_lo: int, size_hi: int, exact_balance: bool = False,
                         strict: bool = True) -> int:
    """ceil(#partitions / best single-set coverage)."""
    limit2 = 0 if exact_balance else _balance_limit2(tau, strict)
    total = math.comb(n, n // 2)
    best = 0
    for s in range(size_lo, size_hi + 1):
        # partitions balancing a fixed s-set: sum over admissible |Y & S| = i
        cnt = sum(math.comb(s, i) * math.comb(n - s, n // 2 - i) for i in range(s + 1) if abs(2 * i - s) <= limit2)
        best = max(best, cnt)
    return -(-total // best) if best else 0


# ---------------------------------------------------------------------------
# probabilities


def hypergeom_pmf(M: int, N: int, k: int, i: int) -> Fraction:
    """Pr[|S & T| = i] for |S| = M inside [N] and T a uniform k-subset."""
    if not (0 <= M <= N and 0 <= k <= N and 0 <= i <= k):
        raise DomainError(f"bad hypergeometric parameters M={M}, N={N}, k={k}, i={i}")
    return Fraction(math.comb(M, i) * math.comb(N - M, k - i), math.comb(N, k))


def hypergeom_tail_bound(M: int, N: int, k: int, t: float) -> float:
    """Upper bound e^{-2 t^2 k} on Pr[| |S & T| - kM/N | >= t k]."""
    if not (0 <= M <= N and 0 <= k <= N):
        raise DomainError("bad hypergeometric parameters")
    return math.exp(-2 * t * t * k)


def hypergeom_tail_exact(M: int, N: int, k: int, t, two_sided: bool = True) -> Fraction:
    """Pr[| |S & T| - kM/N | >= t k], or the upper tail alone.

    The e^{-2 t^2 k} bound holds for each one-sided tail; the two-sided
    probability can exceed it (M=1, N=2, k=1, t=1/2 gives 1).
    """
    mean = Fraction(k * M, N)
    t = Fraction(t)
    dev = (lambda i: abs(i - mean)) if two_sided else (lambda i: i - mean)
    return sum((hypergeom_pmf(M, N, k, i) for i in range(k + 1) if dev(i) >= t * k), Fraction(0))


def hoeffding_bound(n: int, t: float) -> float:
    """2 exp(-2 t^2 / n) for a sum of n independent 0/1 variables."""
    if n <= 0:
        raise DomainError("n must be positive")
    return 2 * math.exp(-2 * t * t / n)


def galvin_middle_probability(g: int) -> Fraction:
    """Pr[|T & S| = g] for |S| = 2g and T a uniform 2g-subset of [4g]."""
    return Fraction(math.comb(2 * g, g) ** 2, math.comb(4 * g, 2 * g))


def fit_sqrt_constants(values: dict[int, Fraction]) -> tuple[float, float]:
    """Tightest c1, c2 with c1/sqrt(g) <= value <= c2/sqrt(g) over the sample."""
    scaled = [float(v) * math.sqrt(g) for g, v in values.items()]
    return min(scaled), max(scaled)


def read_family(path) -> SetFamily:
    with open(path) as fh:
        return SetFamily.from_json(json.load(fh))
