"""Polynomial-method machinery for unbalancing set families.

A covering family (every balanced partition nearly halves some member)
gives a product of linear forms over F_p that vanishes on the middle
layer of {0,1}^{4p}; a 3p-subset T on which it does not vanish then
forces its degree to be at least p. This module builds that product,
checks the vanishing-ideal fact for small p by linear algebra, and runs
the randomized constructions of the excluded set A and of T with exact
verification of everything they return.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from mlcirc.algebra import FieldCtx, is_prime, largest_prime_4p_le, nullspace_modp
from mlcirc.errors import DomainError, PreconditionError, ResourceError
from mlcirc.poly import MultilinearPoly
from mlcirc.rng import stream
from mlcirc.setfam import (
    EXHAUSTIVE_GUARD,
    BalancedPartition,
    SetFamily,
    balanced_masks,
    find_unbalancing_partition,
    imbalance,
)

MIDDLE_LAYER_GUARD = 200_000  # largest C(4p, 2p) evaluated point by point


@dataclass(frozen=True)
class Constants:
    """Numeric knobs of the A and T constructions (multipliers of tau or n)."""

    t1_small: float = 6000  # x tau: sets this small go into T1 whole
    t1_take: float = 6000  # x tau: elements taken from every other set
    t1_cap: float = 0.06  # x n: T1 is padded up to this size
    t2_prob: float = 0.65
    t3_frac: float = 0.52
    t2_band: tuple[float, float] = (0.64, 0.66)  # x n, reported only
    t3_claim: float = 0.01  # x n, reported only
    t4_claim: float = 0.05  # x n, reported only
    a_small: float = 1e4  # x tau: A avoids every set this small
    a_frac: float = 0.01  # |A & S| <= a_frac * |S|
    a_exponent: float = 0.6  # |A| <= n ** a_exponent
    special_window: float = 100  # x tau: size window for n = 4p

    def to_json(self) -> dict:
        d = asdict(self)
        d["t2_band"] = list(self.t2_band)
        return d


ASYMPTOTIC = Constants()
# n around 10^4: only tiny sets are fenced off, A itself stays small
DESK = Constants(t1_small=20, t1_take=20, a_small=10)
# n = 4p + r with p a single digit
TINY = Constants(t1_small=2, t1_take=1, t1_cap=0.05, a_small=2, a_frac=0.25, special_window=1)
PRESETS = {"asymptotic": ASYMPTOTIC, "desk": DESK, "tiny": TINY}


def preset(name: str, **overrides) -> Constants:
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r} (choose from {sorted(PRESETS)})")
    return replace(PRESETS[name], **overrides)


def t_values(size: int, tau: int, t_range: str = "statement", general: bool = False) -> tuple[int, ...]:
    """Offsets t for which a set of this size is considered balanced.

    ``statement`` is -tau+1..tau, ``proof`` the wider -tau..tau+1. In the
    general construction a set of size exactly 2*tau drops t = tau.
    """
    if t_range == "statement":
        lo, hi = -tau + 1, tau
    elif t_range == "proof":
        lo, hi = -tau, tau + 1
    else:
        raise DomainError(f"unknown t-range {t_range!r}")
    if general and size == 2 * tau:
        hi = min(hi, tau - 1)
    return tuple(range(lo, hi + 1))


# ---------------------------------------------------------------------------
# A and B


@dataclass(frozen=True)
class ReductionContext:
    """Excluded set A with its fixed half B; [n] minus A is identified
    with [4p] by increasing order."""

    n: int
    p: int | None
    a_mask: int
    b_mask: int
    tilde: tuple[int, ...]  # 0-based elements of [n] \ A, increasing

    @classmethod
    def from_a(cls, n: int, a_mask: int, p: int | None = None) -> "ReductionContext":
        elems = [i for i in range(n) if a_mask >> i & 1]
        b = 0
        for i in elems[: len(elems) // 2]:
            b |= 1 << i
        tilde = tuple(i for i in range(n) if not a_mask >> i & 1)
        return cls(n, p, a_mask, b, tilde)

    @classmethod
    def trivial(cls, n: int, p: int | None = None) -> "ReductionContext":
        return cls.from_a(n, 0, p)

    @property
    def size(self) -> int:
        return self.a_mask.bit_count()

    def lift(self, mask: int) -> int:
        """Subset of [4p] (bit j = j-th element of [n] minus A) to a subset of [n]."""
        out = 0
        for j, e in enumerate(self.tilde):
            if mask >> j & 1:
                out |= 1 << e
        return out

    def project(self, mask: int) -> int:
        out = 0
        for j, e in enumerate(self.tilde):
            if mask >> e & 1:
                out |= 1 << j
        return out

    def violations(self, fam: SetFamily, tau: int, const: Constants = ASYMPTOTIC) -> dict:
        """Exact check of the exclusion invariants; empty dict means valid."""
        bad: dict = {}
        n = self.n
        if self.p is not None and self.size != n - 4 * self.p:
            bad["size"] = f"|A| = {self.size} but n - 4p = {n - 4 * self.p}"
        if self.size > n ** const.a_exponent:
            bad["exponent"] = f"|A| = {self.size} > n^{const.a_exponent}"
        if self.b_mask & ~self.a_mask or 2 * self.b_mask.bit_count() != self.size - self.size % 2:
            bad["half"] = "B is not half of A"
        frac, small = [], []
        for j, s in enumerate(fam.sets):
            hit = (s & self.a_mask).bit_count()
            if hit > const.a_frac * s.bit_count():
                frac.append(j)
            if s.bit_count() <= const.a_small * tau and hit:
                small.append(j)
        if frac:
            bad["fraction"] = frac
        if small:
            bad["small_sets_hit"] = small
        return bad

    def to_json(self) -> dict:
        return {"n": self.n, "p": self.p, "A": _elements(self.a_mask), "B": _elements(self.b_mask)}


@dataclass(frozen=True)
class AFailure:
    retries: int
    stats: list = field(default_factory=list)

    def __bool__(self):
        return False

    def to_json(self) -> dict:
        return {"status": "failed", "retries": self.retries, "stats": self.stats}


def construct_A(fam: SetFamily, tau: int, a: int, seed: int = 0, max_retries: int = 3,
                const: Constants = ASYMPTOTIC, p: int | None = None) -> ReductionContext | AFailure:
    """Uniformly random a-subset of [n] \\ L, where L is the union of the
    sets of size <= a_small * tau; retried until every set S satisfies
    |A & S| <= a_frac * |S|. The accepted A is re-verified exactly."""
    n = fam.n
    if a < 0 or a > n ** const.a_exponent:
        raise DomainError(f"need 0 <= a <= n^{const.a_exponent} = {n ** const.a_exponent:.1f}, got a={a}")
    if p is not None and a != n - 4 * p:
        raise DomainError(f"a = {a} does not match n - 4p = {n - 4 * p}")
    small_union = 0
    for s in fam.sets:
        if s.bit_count() <= const.a_small * tau:
            small_union |= s
    pool = [i for i in range(n) if not small_union >> i & 1]
    stats = []
    if len(pool) < a:
        return AFailure(0, [{"retry": 0, "reason": f"only {len(pool)} elements outside the small sets"}])
    for retry in range(max_retries):
        rng = stream(seed, "construct_A", retry)
        a_mask = 0
        for i in rng.choice(len(pool), size=a, replace=False) if a else []:
            a_mask |= 1 << pool[int(i)]
        ctx = ReductionContext.from_a(n, a_mask, p)
        bad = ctx.violations(fam, tau, const)
        if not bad:
            return ctx
        stats.append({"retry": retry, "violations": {k: (len(v) if isinstance(v, list) else v) for k, v in bad.items()}})
    return AFailure(max_retries, stats)


# ---------------------------------------------------------------------------
# the product polynomial


@dataclass(frozen=True)
class Factor:
    """prod_t (sum_{k in vars} x_k + offset - t) over F_p."""

    set_index: int
    var_mask: int
    offset: int
    ts: tuple[int, ...]


@dataclass(frozen=True)
class UnbalancePoly:
    p: int
    nvars: int
    factors: tuple[Factor, ...]

    @property
    def degree(self) -> int:
        # a product of non-constant linear forms over a field has full degree
        return sum(len(f.ts) for f in self.factors)

    def eval_indicator(self, mask: int) -> int:
        """f(1_mask) mod p, factor by factor."""
        p = self.p
        acc = 1
        for f in self.factors:
            base = (mask & f.var_mask).bit_count() + f.offset
            for t in f.ts:
                acc = acc * ((base - t) % p) % p
                if not acc:
                    return 0
        return acc

    def zero_factor(self, mask: int) -> int | None:
        """Index of the first factor vanishing at 1_mask, or None."""
        for j, f in enumerate(self.factors):
            base = (mask & f.var_mask).bit_count() + f.offset
            if any((base - t) % self.p == 0 for t in f.ts):
                return j
        return None

    def expand(self) -> MultilinearPoly:
        """Multilinear reduction (x^2 = x); agrees with f on {0,1}^nvars."""
        if self.nvars > 24:
            raise ResourceError("expansion is guarded to 24 variables")
        ctx = FieldCtx.prime(self.p)
        acc = MultilinearPoly.constant(self.nvars, ctx, 1)
        for f in self.factors:
            lin = MultilinearPoly.from_terms(self.nvars, ctx, [(1 << i, 1) for i in range(self.nvars) if f.var_mask >> i & 1])
            for t in f.ts:
                acc = acc.mul_boolean(lin + MultilinearPoly.constant(self.nvars, ctx, f.offset - t))
        return acc

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "nvars": self.nvars,
            "degree": self.degree,
            "factors": [{"set": f.set_index, "vars": _elements(f.var_mask), "offset": f.offset, "t": list(f.ts)}
                        for f in self.factors],
        }


def build_unbalance_poly(fam: SetFamily, tau: int, p: int, ctx: ReductionContext | None = None,
                         t_range: str = "statement") -> UnbalancePoly:
    """f = prod_j B_j. Without a context the universe must be [4p]; with
    one, the variables are [n] \\ A and B shifts every offset."""
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    n = fam.n
    for j, s in enumerate(fam.sets):
        if 2 * s.bit_count() > n:
            raise PreconditionError(f"set {j} has more than n/2 elements; complement it first")
    factors = []
    if ctx is None:
        if n != 4 * p:
            raise DomainError(f"universe {n} is not 4p = {4 * p}; pass a reduction context")
        for j, s in enumerate(fam.sets):
            factors.append(Factor(j, s, -(s.bit_count() // 2), t_values(s.bit_count(), tau, t_range)))
    else:
        if len(ctx.tilde) != 4 * p or ctx.n != n:
            raise DomainError("reduction context does not match the family and p")
        for j, s in enumerate(fam.sets):
            vars_ = ctx.project(s)
            if not vars_:
                raise PreconditionError(f"set {j} lies inside A, so B_{j} would be constant")
            offset = (s & ctx.b_mask).bit_count() - s.bit_count() // 2
            factors.append(Factor(j, vars_, offset, t_values(s.bit_count(), tau, t_range, general=True)))
    poly = UnbalancePoly(p, 4 * p, tuple(factors))
    if poly.degree > 2 * tau * len(fam):
        raise AssertionError("degree exceeds 2 tau m")
    return poly


# ---------------------------------------------------------------------------
# vanishing ideal check


@dataclass
class HegedusResult:
    p: int
    rows: int
    cols: int
    nullity: int
    passed: bool
    counterexample: dict | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _monomials_below(nvars: int, deg: int) -> list[int]:
    out = []
    for d in range(deg):
        y = (1 << d) - 1
        if d == 0:
            out.append(0)
            continue
        while y < 1 << nvars:
            out.append(y)
            low = y & -y
            r = y + low
            y = (((r ^ y) >> 2) // low) | r
    return out


def _weight_masks(nvars: int, w: int) -> list[int]:
    return [y for y in _combinations(nvars, w)]


def _combinations(n: int, k: int):
    if k == 0:
        yield 0
        return
    y = (1 << k) - 1
    while y < 1 << n:
        yield y
        low = y & -y
        r = y + low
        y = (((r ^ y) >> 2) // low) | r


def _eval_block(points: np.ndarray, monos: np.ndarray) -> np.ndarray:
    return ((points[:, None] & monos[None, :]) == monos[None, :]).astype(np.int64)


def hegedus_cost(p: int) -> tuple[int, int]:
    n = 4 * p
    return math.comb(n, 2 * p), sum(math.comb(n, d) for d in range(p))


def hegedus_verify(p: int, allow_long: bool = False, seed: int = 0, block: int = 4096) -> HegedusResult:
    """Every polynomial of degree < p in 4p variables over F_p vanishing on
    all weight-2p points also vanishes on all weight-3p points.

    Checked as a containment: a basis of the nullspace of the middle-layer
    evaluation matrix is evaluated on the weight-3p layer.
    """
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    rows, cols = hegedus_cost(p)
    if p > 3 and not (p == 5 and allow_long):
        raise ResourceError(f"p={p} needs a {rows} x {cols} elimination over F_{p}; "
                            "only p in {2, 3} (or 5 with the long-running flag) is supported")
    nvars = 4 * p
    monos = np.array(_monomials_below(nvars, p), dtype=np.uint64)
    middle = np.array(_weight_masks(nvars, 2 * p), dtype=np.uint64)
    assert len(monos) == cols and len(middle) == rows
    if rows <= 50_000:
        basis = nullspace_modp(_eval_block(middle, monos) % p, p)
    else:
        basis = _nullspace_sampled(middle, monos, p, seed, block)
    upper = np.array(_weight_masks(nvars, 3 * p), dtype=np.uint64)
    for start in range(0, len(upper), block):
        vals = _eval_block(upper[start : start + block], monos) @ basis % p
        hit = np.argwhere(vals)
        if len(hit):
            r, k = hit[0]
            vec = basis[:, k]
            terms = {str(_elements(int(monos[c]))): int(vec[c]) for c in np.flatnonzero(vec)}
            return HegedusResult(p, rows, cols, basis.shape[1], False,
                                 {"polynomial": terms, "point": _elements(int(upper[start + r]))})
    return HegedusResult(p, rows, cols, basis.shape[1], True)


def _nullspace_sampled(points: np.ndarray, monos: np.ndarray, p: int, seed: int, block: int) -> np.ndarray:
    """Nullspace of the full evaluation matrix without materializing it:
    solve on a row sample, check every row blockwise, add offenders, repeat."""
    rng = stream(seed, "hegedus_sample")
    cols = len(monos)
    chosen = set(int(i) for i in rng.choice(len(points), size=min(len(points), 2 * cols), replace=False))
    while True:
        idx = np.array(sorted(chosen))
        basis = nullspace_modp(_eval_block(points[idx], monos), p)
        offenders = []
        for start in range(0, len(points), block):
            vals = _eval_block(points[start : start + block], monos) @ basis % p
            offenders.extend(start + int(r) for r in np.flatnonzero(vals.any(axis=1))[:64])
            if len(offenders) >= 256:
                break
        if not offenders:
            return basis
        chosen.update(offenders)


# ---------------------------------------------------------------------------
# the 3p-subset T


@dataclass
class TResult:
    status: str  # "ok", "abort" or "postcondition_failed"
    t_mask: int | None
    stages: dict
    events: dict
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.status == "ok"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "T": _elements(self.t_mask) if self.t_mask is not None else None,
            "stages": self.stages,
            "events": self.events,
            "failures": self.failures,
        }


def t_violations(fam: SetFamily, tau: int, p: int, t_mask: int, b_mask: int = 0, t_range: str = "statement",
                 general: bool = True) -> list[tuple[int, int]]:
    """Pairs (j, t) with |(T u B) & S_j| = floor(|S_j|/2) + t mod p."""
    bad = []
    tb = t_mask | b_mask
    for j, s in enumerate(fam.sets):
        k = s.bit_count()
        hit = (tb & s).bit_count()
        for t in t_values(k, tau, t_range, general):
            if (hit - k // 2 - t) % p == 0:
                bad.append((j, t))
    return bad


def construct_T(fam: SetFamily, tau: int, p: int, ctx: ReductionContext, seed: int = 0, retry: int = 0,
                const: Constants = ASYMPTOTIC, t_range: str = "statement") -> TResult:
    """Greedy / random / greedy / padding construction of a 3p-subset of
    [n] \\ A, followed by an exact check of the mod-p condition."""
    n = fam.n
    if len(ctx.tilde) != 4 * p:
        raise DomainError("[n] \\ A must have exactly 4p elements")
    for j, s in enumerate(fam.sets):
        if 2 * s.bit_count() > n:
            raise PreconditionError(f"set {j} has more than n/2 elements; complement it first")
    full = (1 << n) - 1
    tilde = full & ~ctx.a_mask
    tilde_list = list(ctx.tilde)
    sets = fam.sets

    # T1: whole small sets, a fixed number of elements from the others, then pad
    t1 = 0
    for s in sets:
        if s.bit_count() <= const.t1_small * tau:
            t1 |= s & tilde
    take = math.ceil(const.t1_take * tau)
    for s in sets:
        if s.bit_count() > const.t1_small * tau:
            need = take - (s & tilde & t1).bit_count()
            for e in _iter_bits(s & tilde & ~t1):
                if need <= 0:
                    break
                t1 |= 1 << e
                need -= 1
    cap = math.floor(const.t1_cap * n)
    t1_before_pad = t1.bit_count()
    for e in tilde_list:
        if t1.bit_count() >= cap:
            break
        t1 |= 1 << e

    # T2: independent coins on the rest of [n] \ A
    rest = [e for e in tilde_list if not t1 >> e & 1]
    rng = stream(seed, "construct_T", retry)
    coins = rng.random(len(rest)) < const.t2_prob
    t2 = 0
    for e, c in zip(rest, coins):
        if c:
            t2 |= 1 << e

    # T3: complete the sets that are still thin
    t3 = 0
    have = t1 | t2 | ctx.b_mask
    for s in sets:
        if (s & have).bit_count() <= const.t3_frac * s.bit_count():
            t3 |= s & tilde & ~(t1 | t2)

    sizes = {"T1": t1.bit_count(), "T1_before_padding": t1_before_pad, "T2": t2.bit_count(), "T3": t3.bit_count()}
    events = {
        "T2_in_band": const.t2_band[0] * n <= sizes["T2"] <= const.t2_band[1] * n,
        "T3_small": sizes["T3"] <= const.t3_claim * n,
    }
    used = sizes["T1"] + sizes["T2"] + sizes["T3"]
    if used > 3 * p:
        sizes["T4"] = None
        events["T4_small"] = None
        return TResult("abort", None, sizes, events)

    # T4: pad to exactly 3p in increasing order
    t4 = 0
    need = 3 * p - used
    taken = t1 | t2 | t3
    for e in tilde_list:
        if need == 0:
            break
        if not taken >> e & 1:
            t4 |= 1 << e
            need -= 1
    sizes["T4"] = t4.bit_count()
    events["T4_small"] = sizes["T4"] <= const.t4_claim * n
    t = taken | t4

    if t.bit_count() != 3 * p or t & ctx.a_mask:
        raise AssertionError("T has the wrong size or meets A")
    bad = t_violations(fam, tau, p, t, ctx.b_mask, t_range)
    if bad:
        return TResult("postcondition_failed", None, sizes, events, [list(b) for b in bad])
    return TResult("ok", t, sizes, events)


def _iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _elements(mask: int) -> list[int]:
    return [i + 1 for i in _iter_bits(mask)]


# ---------------------------------------------------------------------------
# the product distribution with bias 3/4


def mu34_exact(p: int) -> Fraction:
    """Pr[|T| = 3p] when each of 4p elements is kept with probability 3/4."""
    return Fraction(math.comb(4 * p, 3 * p) * 3 ** (3 * p), 4 ** (4 * p))


def mu34_empirical(p: int, trials: int, seed: int = 0) -> float:
    rng = stream(seed, f"mu34/{p}")
    coins = rng.random((trials, 4 * p)) < 0.75
    return float(np.mean(coins.sum(axis=1) == 3 * p))


def sample_T_special(fam: SetFamily, tau: int, p: int, seed: int = 0, budget: int = 100_000,
                     t_range: str = "statement") -> tuple[int | None, int]:
    """Draw T ~ mu_{3/4} on [4p] until |T| = 3p and no set is hit at
    floor(|S|/2) + t mod p. Returns (T or None, draws)."""
    n = 4 * p
    rng = stream(seed, "sample_T_special")
    for draw in range(1, budget + 1):
        coins = rng.random(n) < 0.75
        if int(coins.sum()) != 3 * p:
            continue
        t = 0
        for i in np.flatnonzero(coins):
            t |= 1 << int(i)
        if not t_violations(fam, tau, p, t, 0, t_range, general=False):
            return t, draw
    return None, budget


# ---------------------------------------------------------------------------
# end-to-end pipeline


def _step(steps: list, name: str, ok, **detail):
    steps.append({"name": name, "ok": ok, **detail})


def _middle_layer_check(poly: UnbalancePoly, p: int, lift) -> tuple[bool | None, int | None]:
    """f(1_Y') = 0 for all Y' in C([4p], 2p)? Returns (verdict, first offender lifted to [n])."""
    if math.comb(4 * p, 2 * p) > MIDDLE_LAYER_GUARD:
        return None, None
    for y in balanced_masks(4 * p):
        if poly.eval_indicator(y):
            return False, lift(y)
    return True, None


def witness_pipeline(fam: SetFamily, tau: int, mode: str = "general", seed: int = 0,
                     const: Constants = ASYMPTOTIC, retries: int = 8, t_budget: int = 100_000,
                     t_range: str = "statement", threads: int = 1) -> dict:
    """Run the unbalancing argument as a computation and report each step.

    Nothing here asserts the final inequality at infeasible scale: the
    report says which steps succeeded and what they imply.
    """
    n, m = fam.n, len(fam)
    steps: list = []
    if mode == "special":
        if n % 4 or not is_prime(n // 4):
            raise PreconditionError(f"special mode needs n = 4p with p prime, got n={n}")
        p = n // 4
        lo, hi = const.special_window * tau, n - const.special_window * tau
    elif mode == "general":
        p = largest_prime_4p_le(n)
        lo, hi = 2 * tau, n - 2 * tau
    else:
        raise DomainError(f"unknown mode {mode!r}")
    bad = [j for j, s in enumerate(fam.sets) if not lo <= s.bit_count() <= hi]
    if bad:
        raise PreconditionError(f"sets {bad} are outside the size window [{lo:g}, {hi:g}]")
    _step(steps, "size_window", True, window=[lo, hi])

    work = fam.complemented_small()
    _step(steps, "complement_large_sets", True,
          complemented=[j for j, (a, b) in enumerate(zip(fam.sets, work.sets)) if a != b])

    unbalancing = None
    if n <= EXHAUSTIVE_GUARD:
        found = find_unbalancing_partition(fam, tau, "exhaustive", threads=threads)
        covering = not found
        if found:
            unbalancing = found
        _step(steps, "exhaustive_covering_check", True, covering=covering)
    else:
        covering = None
        _step(steps, "exhaustive_covering_check", None, reason=f"n > {EXHAUSTIVE_GUARD}")

    if mode == "general":
        a = n - 4 * p
        ctx = construct_A(work, tau, a, seed, retries, const, p)
        _step(steps, "construct_A", bool(ctx), **({"A": ctx.to_json()} if ctx else ctx.to_json()))
        if not ctx:
            return _finish(fam, tau, p, mode, steps, None, unbalancing, covering, None)
        poly = build_unbalance_poly(work, tau, p, ctx, t_range)
        lift = lambda y: ctx.lift(y) | ctx.b_mask  # noqa: E731
    else:
        ctx = None
        poly = build_unbalance_poly(work, tau, p, None, t_range)
        lift = lambda y: y  # noqa: E731
    _step(steps, "build_f", poly.degree <= 2 * tau * m, degree=poly.degree, degree_bound=2 * tau * m)

    vanishes, offender = _middle_layer_check(poly, p, lift)
    detail = {}
    if offender is not None:
        y = BalancedPartition(n, offender)
        if min(imbalance(y, s) for s in fam.sets) < tau:
            raise AssertionError("non-vanishing point does not unbalance the family")
        detail["unbalancing_partition"] = y.elements
        unbalancing = unbalancing or y
    _step(steps, "vanishes_on_middle_layer", vanishes, **detail)

    t_mask = None
    if mode == "general":
        attempts = []
        for retry in range(retries):
            res = construct_T(work, tau, p, ctx, seed, retry, const, t_range)
            attempts.append({"retry": retry, "status": res.status, "stages": res.stages, "events": res.events})
            if res:
                t_mask = ctx.project(res.t_mask)
                break
        _step(steps, "construct_T", t_mask is not None, attempts=attempts)
    else:
        t_mask, draws = sample_T_special(work, tau, p, seed, t_budget, t_range)
        _step(steps, "sample_T", t_mask is not None, draws=draws)

    value = None
    if t_mask is not None:
        value = poly.eval_indicator(t_mask)
        if t_mask.bit_count() != 3 * p:
            raise AssertionError("T must have 3p elements")
        _step(steps, "f_at_T_nonzero", value != 0, value=value,
              T=_elements(ctx.lift(t_mask)) if ctx else _elements(t_mask))
    return _finish(fam, tau, p, mode, steps, poly, unbalancing, covering, value)


def _finish(fam, tau, p, mode, steps, poly, unbalancing, covering, value) -> dict:
    m = len(fam)
    report = {
        "mode": mode,
        "n": fam.n,
        "m": m,
        "tau": tau,
        "p": p,
        "degree_bound": 2 * tau * m,
        "degree": poly.degree if poly else None,
        "steps": steps,
        "verified": {s["name"]: s["ok"] for s in steps},
        "unbalancing_partition": unbalancing.elements if unbalancing else None,
    }
    vanish = next((s["ok"] for s in steps if s["name"] == "vanishes_on_middle_layer"), None)
    if poly is not None and vanish and value:
        # vanishing on the middle layer and not at T forces degree >= p
        report["conclusion"] = {
            "degree_at_least_p": poly.degree >= p,
            "m_lower_bound": str(Fraction(p, 2 * tau)),
            "m_meets_lower_bound": 2 * tau * m >= p,
        }
    else:
        report["conclusion"] = None
    return report
