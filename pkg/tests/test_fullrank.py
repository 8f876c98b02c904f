from __future__ import annotations

import math

import pytest

from mlcirc.algebra import FieldCtx
from mlcirc.errors import DomainError, ResourceError
from mlcirc.fullrank import (
    build,
    g_poly,
    is_permutation_matrix,
    pairing,
    specialize,
    specialized_circuit,
    verify_full_rank,
)
from mlcirc.poly import Partition, rank_yz
from mlcirc.setfam import balanced_masks

Q = FieldCtx.rational()


def test_pairing_matches_sorted_halves():
    assert pairing(6, 0b010011) == ((1, 3), (2, 4), (5, 6))


def test_build_term_count():
    for n in (2, 4, 6, 8):
        assert len(build(n).terms) == math.comb(n, n // 2)
    with pytest.raises(DomainError):
        build(5)
    with pytest.raises(ResourceError):
        build(18)


def test_g_poly_expansion():
    g = g_poly(4, ((1, 3), (2, 4)), Q)
    assert set(g.terms) == {0b0011, 0b1001, 0b0110, 0b1100}


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_indicator_specialization_certifies(n):
    rep = verify_full_rank(build(n))
    assert rep["passed"] and rep["partitions"] == math.comb(n, n // 2)
    assert all(r["permutation"] and r["equals_g_Y"] for r in rep["checked"])


def test_specialization_at_indicator_is_g_y():
    n = 6
    fp = build(n)
    for y in balanced_masks(n):
        f = specialize(fp, [y >> i & 1 for i in range(n)], Q)
        assert f == g_poly(n, pairing(n, y), Q)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_derivatives_have_half_rank(n):
    for y in balanced_masks(n)[:10]:
        part = Partition(n, y)
        g = g_poly(n, pairing(n, y), Q)
        assert rank_yz(g, part) == 2 ** (n // 2)
        for i in range(1, n + 1):
            assert rank_yz(g.derivative(i), part) == 2 ** (n // 2 - 1)


def test_random_specialization_mostly_full_rank():
    # the determinant is a nonzero polynomial of degree <= 2^{n/2} n/2 in W,
    # so random points rarely hit it; count failures instead of demanding none
    rep = verify_full_rank(build(6), "random", p=1009, seed=3)
    assert len(rep["failures"]) <= 2


def test_random_threads_identical():
    a = verify_full_rank(build(6), "random", seed=1, threads=1)
    b = verify_full_rank(build(6), "random", seed=1, threads=4)
    assert a == b


def test_specialized_circuit():
    c = specialized_circuit(6, [2, 4, 6], Q)
    assert c.expand() == g_poly(6, pairing(6, 0b101010), Q)
    with pytest.raises(DomainError):
        specialized_circuit(6, [1], Q)


def test_is_permutation_matrix():
    assert is_permutation_matrix([[0, 1], [1, 0]])
    assert not is_permutation_matrix([[1, 1], [0, 0]])
    assert not is_permutation_matrix([[1, 0], [1, 0]])
    assert not is_permutation_matrix([])


def test_guard_and_method():
    with pytest.raises(ResourceError):
        verify_full_rank(build(14))
    with pytest.raises(DomainError):
        verify_full_rank(build(4), "magic")
