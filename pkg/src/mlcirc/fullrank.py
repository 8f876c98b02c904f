"""A polynomial of full partial-derivative rank under every balanced
partition, and its certification by specialization.

f = sum over n/2-subsets B of r_B * g_B with r_B = prod_{l in B} w_l and
g_B = prod_l (x_{i_l} + x_{j_l}), pairing the l-th smallest element of B
with the l-th smallest element of its complement. Setting w = 1_Y leaves
only g_Y, whose matrix under (Y, Z) is a permutation matrix, so the
determinant over F(W) is a nonzero polynomial.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from mlcirc.algebra import FieldCtx
from mlcirc.circuit import Circuit, CircuitBuilder
from mlcirc.errors import DomainError, ResourceError
from mlcirc.poly import MultilinearPoly, Partition, build_pdm, rank_yz
from mlcirc.rng import substream
from mlcirc.setfam import balanced_masks

BUILD_GUARD = 16
VERIFY_GUARD = 12
DEFAULT_PRIME = 1009


def pairing(n: int, b_mask: int) -> tuple[tuple[int, int], ...]:
    """(i_l, j_l) pairs (1-based) matching B and its complement in increasing order."""
    ins = [i + 1 for i in range(n) if b_mask >> i & 1]
    outs = [i + 1 for i in range(n) if not b_mask >> i & 1]
    return tuple(zip(ins, outs))


@dataclass(frozen=True)
class FullRankPoly:
    n: int
    terms: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]  # (B as W-mask, pairing)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"B": [i + 1 for i in range(self.n) if b >> i & 1], "pairs": [list(pr) for pr in prs]}
                      for b, prs in self.terms],
        }


def build(n: int) -> FullRankPoly:
    if n < 2 or n % 2:
        raise DomainError(f"n must be even and >= 2, got {n}")
    if n > BUILD_GUARD:
        raise ResourceError(f"C({n}, {n // 2}) terms exceed the guard n <= {BUILD_GUARD}")
    fp = FullRankPoly(n, tuple((b, pairing(n, b)) for b in balanced_masks(n)))
    assert len(fp.terms) == math.comb(n, n // 2)
    return fp


def g_poly(n: int, pairs: Sequence[tuple[int, int]], ctx: FieldCtx, scale=1) -> MultilinearPoly:
    """scale * prod (x_i + x_j), expanded directly: one monomial per choice."""
    terms = {}
    c = ctx(scale)
    for choice in range(1 << len(pairs)):
        m = 0
        for l, (i, j) in enumerate(pairs):
            m |= 1 << ((i if choice >> l & 1 else j) - 1)
        terms[m] = c
    return MultilinearPoly(n, ctx, terms if c != ctx.zero else {})


def specialize(fp: FullRankPoly, omega: Sequence, ctx: FieldCtx) -> MultilinearPoly:
    """Substitute w = omega and expand in X."""
    n = fp.n
    if len(omega) != n:
        raise DomainError(f"omega needs {n} entries, got {len(omega)}")
    w = [ctx(v) for v in omega]
    acc: dict[int, object] = {}
    for b, prs in fp.terms:
        r = ctx.one
        for i in range(n):
            if b >> i & 1:
                r = ctx.mul(r, w[i])
        if r == ctx.zero:
            continue
        for m in g_poly(n, prs, ctx).terms:
            acc[m] = ctx.add(acc.get(m, ctx.zero), r)
    return MultilinearPoly.from_terms(n, ctx, acc.items())


def is_permutation_matrix(rows: Sequence[Sequence]) -> bool:
    if not rows or len(rows) != len(rows[0]):
        return False
    zero = 0
    col_hits = [0] * len(rows[0])
    for row in rows:
        nz = [j for j, v in enumerate(row) if v != zero]
        if len(nz) != 1:
            return False
        col_hits[nz[0]] += 1
    return all(h == 1 for h in col_hits)


def _check_indicator(fp: FullRankPoly, y: int, ctx: FieldCtx) -> dict:
    n = fp.n
    g = specialize(fp, [1 if y >> i & 1 else 0 for i in range(n)], ctx)
    part = Partition(n, y)
    ok_g = g == g_poly(n, pairing(n, y), ctx)
    perm = is_permutation_matrix(build_pdm(g, part).matrix.to_rows())
    r = rank_yz(g, part)
    return {"Y": _elems(y), "equals_g_Y": ok_g, "permutation": perm, "rank": r,
            "ok": ok_g and perm and r == 2 ** (n // 2)}


def _check_random(fp: FullRankPoly, y: int, index: int, p: int, seed: int) -> dict:
    n = fp.n
    ctx = FieldCtx.prime(p)
    rng = substream(seed, "fullrank_random", index)
    omega = [int(v) for v in rng.integers(0, p, size=n)]
    r = rank_yz(specialize(fp, omega, ctx), Partition(n, y))
    return {"Y": _elems(y), "omega": omega, "rank": r, "ok": r == 2 ** (n // 2)}


def verify_full_rank(fp: FullRankPoly, method: str = "indicator", p: int = DEFAULT_PRIME, seed: int = 0,
                     threads: int = 1) -> dict:
    """Check rank 2^{n/2} under every balanced partition.

    A failure of the random method only means the determinant vanished at
    the sampled point; the indicator method is the certificate.
    """
    n = fp.n
    if n > VERIFY_GUARD:
        raise ResourceError(f"verification over all partitions is guarded to n <= {VERIFY_GUARD}")
    parts = balanced_masks(n)
    ctx = FieldCtx.prime(p)
    if method == "indicator":
        work = lambda iy: _check_indicator(fp, iy[1], ctx)  # noqa: E731
    elif method == "random":
        work = lambda iy: _check_random(fp, iy[1], iy[0], p, seed)  # noqa: E731
    else:
        raise DomainError(f"unknown method {method!r}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(work, enumerate(parts)))
    else:
        rows = [work(iy) for iy in enumerate(parts)]
    failures = [r for r in rows if not r["ok"]]
    return {
        "n": n,
        "method": method,
        "p": p,
        "partitions": len(parts),
        "expected_rank": 2 ** (n // 2),
        "passed": not failures,
        "failures": failures,
        "checked": rows,
    }


def specialized_circuit(n: int, y_indices: Sequence[int], ctx: FieldCtx) -> Circuit:
    """Circuit for g_Y = prod (x_i + x_j), the specialization at w = 1_Y."""
    y = 0
    for i in y_indices:
        y |= 1 << (i - 1)
    if 2 * y.bit_count() != n:
        raise DomainError("Y must have n/2 elements")
    b = CircuitBuilder(n, ctx)
    factors = [b.add(b.var(i), b.var(j)) for i, j in pairing(n, y)]
    return b.build([b.prod(factors)])


def _elems(mask: int) -> list[int]:
    return [i + 1 for i in range(mask.bit_length()) if mask >> i & 1]
