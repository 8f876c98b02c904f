from __future__ import annotations

import random

import pytest

from mlcirc.algebra import FieldCtx
from mlcirc.circuit import CircuitBuilder
from mlcirc.errors import DomainError, PreconditionError
from mlcirc.fullrank import specialized_circuit
from mlcirc.gen import random_sm_circuit
from mlcirc.leveled import decompose, imbalance2, leveled_sets, rank_collapse_check
from mlcirc.poly import MultilinearPoly, Partition, popcount

Q = FieldCtx.rational()


def two_blocks(n=8, ctx=Q):
    # (x1 + ... + x_{n/2}) * (x_{n/2+1} + ... + x_n): both factors are lower-leveled
    b = CircuitBuilder(n, ctx)
    left = b.sum([b.var(i) for i in range(1, n // 2 + 1)])
    right = b.sum([b.var(i) for i in range(n // 2 + 1, n + 1)])
    return b.build([b.mul(left, right)]), left, right


def test_leveled_sets_definition(rng):
    for _ in range(30):
        n = rng.choice([6, 8, 10])
        k = rng.randint(0, n // 2 - 1)
        c = random_sm_circuit(n, 40, Q, rng)
        lev = leveled_sets(c, k)
        xs = c.var_sets()
        for u in lev.lower:
            assert k < popcount(xs[u]) < n - k
            assert any(u in c.gate(v).children and popcount(xs[v]) >= n - k for v in lev.upper)
        for v in lev.upper:
            assert popcount(xs[v]) >= n - k
        assert len(lev.lower) <= 2 * len(lev.upper)


def test_leveled_sets_two_blocks():
    c, left, right = two_blocks()
    lev = leveled_sets(c, 1)
    assert lev.lower == {left, right}
    assert lev.upper == {c.outputs[0]}
    assert leveled_sets(c, 1, root=left).lower == frozenset()


def test_leveled_bad_k():
    c, _, _ = two_blocks()
    with pytest.raises(DomainError):
        leveled_sets(c, 4)


def test_decompose_product_of_two_lower_gates():
    c, left, right = two_blocks()
    dec = decompose(c, 1)
    assert dec.gates == [left, right]
    (g1, h1), (g2, h2) = dec.pairs
    assert g1.is_zero()
    assert g2 == h1 and h2 == c.expand(right)
    assert dec.residual.is_zero()
    assert dec.checks == {"identity": True, "disjoint": True, "degree_ok": True}


@pytest.mark.parametrize("ctx", [Q, FieldCtx.prime(3)], ids=str)
def test_decompose_identity_random(ctx):
    rng = random.Random(17)
    seen_pairs = 0
    for _ in range(25):
        n = rng.choice([6, 8, 10])
        c = random_sm_circuit(n, rng.randint(n + 5, 45), ctx, rng)
        dec = decompose(c, 1)
        total = dec.residual
        for g, h in dec.pairs:
            assert not g.support() & h.support()
            total = total + g * h
        assert total == c.expand()
        seen_pairs += len(dec.pairs)
    assert seen_pairs > 0


def test_decompose_rejects_non_multilinear():
    b = CircuitBuilder(4, Q)
    x = b.var(1)
    with pytest.raises(PreconditionError):
        decompose(b.build([b.mul(x, x)]), 1)


def test_imbalance2():
    assert imbalance2(0b0011, 0b0111) == 1
    assert imbalance2(0b0011, 0b1100) == 2


def test_rank_collapse_on_matching_circuit():
    n = 8
    c = specialized_circuit(n, [1, 2, 3, 4], Q)
    part = Partition.from_indices(n, [1, 2, 3, 4])
    rep = rank_collapse_check(c, 1, 1, part)
    assert rep["rank_f"] == 16
    assert rep["subadditive_ok"] and rep["residual"]["within_bound"]
    for row in rep["pairs"]:
        assert row["rank"] <= row["bound_multiplicative"]


def test_rank_collapse_needs_balanced_partition():
    c, _, _ = two_blocks()
    with pytest.raises(DomainError):
        rank_collapse_check(c, 1, 1, Partition.from_indices(8, [1]))


def test_two_blocks_rank_is_one():
    c, _, _ = two_blocks()
    f = c.expand()
    assert f == MultilinearPoly.from_terms(8, Q, {(1 << i) | (1 << j): 1 for i in range(4) for j in range(4, 8)})
    rep = rank_collapse_check(c, 1, 1, Partition.from_indices(8, [1, 2, 3, 4]))
    assert rep["rank_f"] == 1
