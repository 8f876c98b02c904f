from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlcirc.algebra import FieldCtx, rank_bareiss
from mlcirc.errors import DomainError
from mlcirc.poly import (
    MultilinearPoly,
    Partition,
    PropertyReport,
    build_pdm,
    check_pdm_properties,
    compress,
    indices_of,
    low_degree_rank_bound,
    mask_of,
    random_poly,
    rank_yz,
)
from mlcirc.setfam import balanced_masks

Q = FieldCtx.rational()
F101 = FieldCtx.prime(101)


def polys(ctx, n):
    coef = st.integers(-5, 5) if ctx.p is not None else st.builds(Fraction, st.integers(-5, 5), st.integers(1, 4))
    return st.dictionaries(st.integers(0, (1 << n) - 1), coef, max_size=12).map(
        lambda d: MultilinearPoly.from_terms(n, ctx, d))


def x(n, i, ctx=Q):
    return MultilinearPoly.var(n, ctx, i)


def test_mask_helpers():
    assert mask_of([1, 3]) == 0b101
    assert indices_of(0b1010) == [2, 4]
    assert compress(0b1010, 0b1110) == 0b101


def test_zero_coefficients_dropped():
    f = MultilinearPoly.from_terms(3, F101, [(1, 50), (1, 51), (2, 3)])
    assert f.terms == {2: 3}
    with pytest.raises(DomainError):
        MultilinearPoly(2, Q, {1: Fraction(0)})


def test_product_must_be_multilinear():
    with pytest.raises(DomainError):
        x(3, 1) * (x(3, 1) + x(3, 2))
    assert x(3, 1).mul_boolean(x(3, 1)) == x(3, 1)


@settings(max_examples=40, deadline=None)
@given(polys(Q, 4), polys(Q, 4), polys(Q, 4))
def test_ring_axioms_boolean_product(f, g, h):
    assert f + g == g + f
    assert (f + g) + h == f + (g + h)
    assert f.mul_boolean(g) == g.mul_boolean(f)
    assert f.mul_boolean(g + h) == f.mul_boolean(g) + f.mul_boolean(h)
    assert f - f == MultilinearPoly.zero(4, Q)


@settings(max_examples=40, deadline=None)
@given(polys(F101, 4), polys(F101, 4), st.lists(st.integers(0, 100), min_size=4, max_size=4))
def test_eval_is_a_homomorphism(f, g, pt):
    assert (f + g).eval(pt) == F101.add(f.eval(pt), g.eval(pt))


@settings(max_examples=40, deadline=None)
@given(polys(Q, 5), st.integers(1, 5))
def test_derivative_is_restriction_difference(f, i):
    assert f.derivative(i) == f.restrict(i, 1) - f.restrict(i, 0)


def test_eval_indicator_matches_eval(rng):
    f = random_poly(6, Q, rng, density=0.5)
    for mask in range(64):
        assert f.eval_indicator(mask) == f.eval([mask >> i & 1 for i in range(6)])


@pytest.mark.parametrize("ctx", [Q, F101, FieldCtx.prime(2)], ids=str)
def test_json_roundtrip(ctx, rng):
    f = random_poly(5, ctx, rng, density=0.6)
    assert MultilinearPoly.from_json(f.to_json()) == f


def test_json_rejects_repeated_variable():
    with pytest.raises(DomainError):
        MultilinearPoly.from_json({"n": 3, "field": "rational", "terms": [{"vars": [1, 1], "coef": "1"}]})


def test_pdm_entries_are_coefficients(rng):
    n = 6
    f = random_poly(n, Q, rng, density=0.7)
    part = Partition.from_indices(n, [2, 3, 5])
    pdm = build_pdm(f, part)
    assert (pdm.matrix.rows, pdm.matrix.cols) == (8, 8)
    y, z = part.y_mask, part.z_mask
    for m1 in range(1 << n):
        if m1 & ~y:
            continue
        for m2 in range(1 << n):
            if m2 & ~z:
                continue
            assert pdm.entry(m1, m2) == f.terms.get(m1 | m2, 0)


@pytest.mark.parametrize("ctx", [Q, F101, FieldCtx.prime(2)], ids=str)
def test_rank_matches_bareiss_oracle(ctx):
    rnd = random.Random(5)
    for _ in range(60):
        n = rnd.choice([2, 4, 6, 8])
        f = random_poly(n, ctx, rnd, density=rnd.random(), max_degree=rnd.choice([None, 1, 2]))
        part = Partition(n, rnd.choice(balanced_masks(n)))
        r = rank_yz(f, part)
        if ctx.p is None:
            assert r == rank_bareiss(build_pdm(f, part).matrix)
        assert r == rank_yz(f, part.swapped())


def test_rank_small_examples():
    n = 4
    part = Partition.from_indices(n, [1, 2])
    # x1 x3 + x2 x4 has a 2x2 identity block
    f = x(n, 1) * x(n, 3) + x(n, 2) * x(n, 4)
    assert rank_yz(f, part) == 2
    # a product across the cut has rank 1
    g = (x(n, 1) + x(n, 2)) * (x(n, 3) + x(n, 4))
    assert rank_yz(g, part) == 1
    assert rank_yz(MultilinearPoly.zero(n, Q), part) == 0


def test_low_degree_bound_fails_at_two_variables():
    # x1 + x2 under Y = {1}: rank 2 > (n/2)^(deg+1) = 1
    f = x(2, 1) + x(2, 2)
    assert rank_yz(f, Partition.from_indices(2, [1])) == 2
    assert low_degree_rank_bound(2, 1) == 1


@pytest.mark.parametrize("ctx", [Q, F101], ids=str)
def test_property_suite_small(ctx):
    rnd = random.Random(11)
    report = PropertyReport()
    for _ in range(10):
        n = rnd.choice([4, 6, 8])
        sample = [random_poly(n, ctx, rnd, density=0.4) for _ in range(2)]
        for y in rnd.sample(balanced_masks(n), 5):
            check_pdm_properties(sample, Partition(n, y), rnd, report)
    assert report.passed, report.items


def test_full_rank_derivative_item():
    # sum over a perfect matching across the cut has full rank and
    # every first derivative halves it
    n = 6
    f = (x(n, 1) + x(n, 4)) * (x(n, 2) + x(n, 5)) * (x(n, 3) + x(n, 6))
    part = Partition.from_indices(n, [1, 2, 3])
    assert rank_yz(f, part) == 8
    for i in range(1, n + 1):
        assert rank_yz(f.derivative(i), part) == 4


def test_property_report_witness_only_on_failure():
    rep = PropertyReport()
    calls = []
    rep.record(1, True, lambda: calls.append(1))
    assert not calls
    rep.record(1, False, lambda: {"bad": True})
    assert rep.items[1]["witness"] == {"bad": True} and not rep.passed


def test_mixed_sample_rejected():
    with pytest.raises(DomainError):
        check_pdm_properties([MultilinearPoly.zero(4, Q), MultilinearPoly.zero(4, F101)], Partition(4, 3))


def test_unbalanced_partition_skips_items_4_and_5():
    rnd = random.Random(2)
    rep = check_pdm_properties([random_poly(5, Q, rnd)], Partition.from_indices(5, [1, 2]), rnd)
    assert rep.items[4]["checked"] == rep.items[5]["checked"] == 0
    assert rep.items[1]["checked"] == 1


def test_all_partitions_small_n_by_brute_force():
    # rank via explicit minors for 2x2 matrices
    n = 2
    for coefs in itertools.product([0, 1, 2], repeat=4):
        f = MultilinearPoly.from_terms(n, Q, dict(enumerate(coefs)))
        part = Partition.from_indices(n, [1])
        a, b, c, d = coefs[0], coefs[2], coefs[1], coefs[3]  # rows x1^0, x1^1; cols x2^0, x2^1
        expect = 2 if a * d - b * c else (1 if any(coefs) else 0)
        assert rank_yz(f, part) == expect
