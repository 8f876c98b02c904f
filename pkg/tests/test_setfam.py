from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlcirc.errors import DomainError, ResourceError
from mlcirc.gen import random_family
from mlcirc.setfam import (
    BalancedPartition,
    SetFamily,
    balanced_masks,
    colex_rank,
    colex_unrank,
    counting_lower_bound,
    covers,
    find_unbalancing_partition,
    fit_sqrt_constants,
    galvin_interval_family,
    galvin_middle_probability,
    hoeffding_bound,
    hypergeom_pmf,
    hypergeom_tail_bound,
    hypergeom_tail_exact,
    imbalance,
    interval,
    interval_tau_family,
    min_family_search,
    random_balanced_mask,
)


def brute_covers(n, sets, limit2):
    """Independent oracle: itertools over all n/2-subsets, first failure in lexicographic order."""
    misses = []
    for ys in itertools.combinations(range(n), n // 2):
        y = sum(1 << i for i in ys)
        if not any(abs(2 * bin(y & s).count("1") - bin(s).count("1")) <= limit2 for s in sets):
            misses.append(y)
    return misses


def test_imbalance_examples():
    y = BalancedPartition.from_indices(4, [1, 2])
    assert imbalance(y, 0b0110) == 0
    assert imbalance(y, 0b0011) == 1
    assert imbalance(y, 0b0111) == Fraction(1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda h: st.tuples(st.just(2 * h), st.randoms(use_true_random=False))))
def test_imbalance_complement_symmetry(args):
    n, rnd = args
    y = BalancedPartition(n, sum(1 << i for i in rnd.sample(range(n), n // 2)))
    s = rnd.randrange(1, 1 << n)
    assert imbalance(y, s) == imbalance(y, ((1 << n) - 1) & ~s)


def test_partition_and_family_validation():
    with pytest.raises(DomainError):
        BalancedPartition(5, 0b11)
    with pytest.raises(DomainError):
        BalancedPartition(4, 0b111)
    with pytest.raises(DomainError):
        SetFamily(4, (0,))
    with pytest.raises(DomainError):
        SetFamily(4, (0b1111,))
    fam = SetFamily.from_lists(8, [[1, 2], [1, 2, 3, 4, 5, 6, 7]])
    assert fam.size_violations(1) == [1]
    assert fam.complemented_small().as_lists() == [[1, 2], [8]]
    assert SetFamily.from_json(fam.to_json()) == fam


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12])
def test_colex_enumeration(n):
    masks = balanced_masks(n)
    assert len(masks) == math.comb(n, n // 2)
    assert masks == sorted(masks)
    for r, m in enumerate(masks):
        assert colex_unrank(r, n, n // 2) == m
        assert colex_rank(m) == r


def test_galvin_interval_family():
    fam = galvin_interval_family(1)
    assert fam.as_lists() == [[1, 2], [2, 3], [3, 4]]
    fam2 = galvin_interval_family(2)
    assert len(fam2) == 5 and all(bin(s).count("1") == 4 for s in fam2.sets)
    assert brute_covers(8, fam2.sets, 0) == []


@pytest.mark.parametrize("gn", [1, 2, 3, 4])
def test_galvin_discrete_ivt(gn):
    # alpha_i(T) = |T & S_i| - gn changes by at most 1 between neighbours and alpha_1 = -alpha_{2gn+1}
    fam = galvin_interval_family(gn, verify=False)
    for t in balanced_masks(4 * gn):
        alphas = [bin(t & s).count("1") - gn for s in fam.sets]
        assert alphas[0] == -alphas[-1]
        assert all(abs(a - b) <= 1 for a, b in zip(alphas, alphas[1:]))


def test_interval_tau_family_shape():
    assert interval_tau_family(8, 2).as_lists() == [[1, 2, 3, 4], [3, 4, 5, 6], [5, 6, 7, 8]]
    assert len(interval_tau_family(8, 1)) == 5
    for n in (8, 12, 16, 20):
        for tau in range(1, n // 4 + 1):
            assert len(interval_tau_family(n, tau)) <= n / (2 * tau) + 1
    with pytest.raises(DomainError):
        interval_tau_family(8, 3)


@pytest.mark.parametrize("n,tau", [(8, 1), (8, 2), (10, 1), (10, 2), (12, 1), (12, 2)])
def test_interval_tau_family_covers_non_strict(n, tau):
    fam = interval_tau_family(n, tau)
    assert covers(fam, tau, strict=False) == (True, None)
    assert brute_covers(n, fam.sets, 2 * tau) == []


def test_covers_trivial_cases():
    ok, w = covers(SetFamily(4, ()), 1)
    assert not ok and w is not None
    ok, w = covers(SetFamily(4, (interval(1, 2),)), 1)
    assert not ok and imbalance(w, interval(1, 2)) >= 1


def test_covers_against_oracle():
    rnd = random.Random(2)
    for _ in range(150):
        n = rnd.choice([4, 6, 8, 10])
        fam = SetFamily(n, tuple(random_family(n, rnd.randint(1, 5), rnd)))
        tau = rnd.randint(1, 2)
        for strict in (True, False):
            limit2 = 2 * tau - 1 if strict else 2 * tau
            misses = brute_covers(n, fam.sets, limit2)
            ok, w = covers(fam, tau, strict=strict)
            assert ok == (not misses)
            if misses:
                assert w.y_mask == min(misses)  # colex-least == numerically least


def test_covers_threads_deterministic():
    rnd = random.Random(5)
    for _ in range(20):
        n = 12
        fam = SetFamily(n, tuple(random_family(n, 3, rnd)))
        assert covers(fam, 1, threads=1) == covers(fam, 1, threads=4) == covers(fam, 1, threads=7)


def test_covers_guard():
    with pytest.raises(ResourceError):
        covers(SetFamily(30, (1,)), 1)


def test_duality_covers_unbalance():
    rnd = random.Random(6)
    for _ in range(100):
        n = rnd.choice([4, 6, 8, 10, 12])
        fam = SetFamily(n, tuple(random_family(n, rnd.randint(1, 6), rnd)))
        ok, _ = covers(fam, 1)
        found = find_unbalancing_partition(fam, 1)
        assert ok != bool(found)


def test_unbalance_examples():
    y = find_unbalancing_partition(SetFamily.from_lists(4, [[1, 2]]), 1)
    assert y and imbalance(y, 0b11) >= 1
    miss = find_unbalancing_partition(interval_tau_family(8, 1), 2)
    assert not miss and miss.tried == 70


def test_randomized_unbalance_agrees_with_exhaustive():
    rnd = random.Random(8)
    checked = 0
    for _ in range(40):
        fam = SetFamily(12, tuple(random_family(12, 5, rnd)))
        if find_unbalancing_partition(fam, 1):
            found = find_unbalancing_partition(fam, 1, mode="randomized", budget=100_000, seed=checked)
            assert found and all(imbalance(found, s) >= 1 for s in fam.sets)
            checked += 1
    assert checked > 0


def test_randomized_is_seeded():
    fam = SetFamily(12, (interval(1, 6),))
    a = find_unbalancing_partition(fam, 1, mode="randomized", seed=3)
    b = find_unbalancing_partition(fam, 1, mode="randomized", seed=3)
    assert a == b


def test_random_balanced_mask_uniform_enough():
    import numpy as np

    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(6000):
        m = random_balanced_mask(4, rng)
        assert bin(m).count("1") == 2
        counts[m] = counts.get(m, 0) + 1
    assert len(counts) == 6 and min(counts.values()) > 800


def test_min_family_galvin_one():
    res = min_family_search(4, 0, 2, 2, exact_balance=True)
    assert res.m == 2
    assert brute_covers(4, res.family.sets, 0) == []


def test_min_family_galvin_two():
    res = min_family_search(8, 0, 4, 4, exact_balance=True)
    assert res.m is not None and res.m < 8
    assert brute_covers(8, res.family.sets, 0) == []


@pytest.mark.parametrize("n,lo,hi,exact,strict", [(4, 2, 2, False, False), (4, 2, 2, True, True), (6, 2, 4, False, True),
                                                  (6, 3, 3, True, True), (6, 2, 2, False, False)])
def test_min_family_against_brute_force(n, lo, hi, exact, strict):
    tau = 1
    limit2 = 0 if exact else (2 * tau - 1 if strict else 2 * tau)
    cands = [s for s in range(1, (1 << n) - 1) if lo <= bin(s).count("1") <= hi]
    best = None
    for m in range(1, 5):
        if any(not brute_covers(n, fam, limit2) for fam in itertools.combinations(cands, m)):
            best = m
            break
    res = min_family_search(n, tau, lo, hi, exact_balance=exact, strict=strict)
    assert res.m == best
    if best is not None:
        assert res.m >= counting_lower_bound(n, tau, lo, hi, exact, strict)


def test_min_family_infeasible():
    # odd-size sets can never be exactly halved
    for n, size in ((6, 3), (4, 1)):
        res = min_family_search(n, 0, size, size, exact_balance=True)
        assert not res.feasible and res.family is None


def test_min_family_guard():
    with pytest.raises(ResourceError):
        min_family_search(14, 1, 2, 12)


def test_hypergeom_pmf():
    assert hypergeom_pmf(2, 4, 2, 1) == Fraction(2, 3)
    rnd = random.Random(1)
    for _ in range(50):
        N = rnd.randint(1, 40)
        M, k = rnd.randint(0, N), rnd.randint(0, N)
        assert sum(hypergeom_pmf(M, N, k, i) for i in range(k + 1)) == 1
    with pytest.raises(DomainError):
        hypergeom_pmf(5, 4, 2, 1)


def test_hypergeom_pmf_by_enumeration():
    N, M, k = 7, 3, 4
    counts = [0] * (k + 1)
    for t in itertools.combinations(range(N), k):
        counts[sum(1 for x in t if x < M)] += 1
    for i in range(k + 1):
        assert hypergeom_pmf(M, N, k, i) == Fraction(counts[i], math.comb(N, k))


def test_tail_bound_one_sided():
    rnd = random.Random(4)
    for _ in range(200):
        N = rnd.randint(2, 30)
        M, k = rnd.randint(0, N), rnd.randint(1, N)
        t = Fraction(rnd.randint(1, 10), 20)
        bound = hypergeom_tail_bound(M, N, k, float(t))
        assert float(hypergeom_tail_exact(M, N, k, t, two_sided=False)) <= bound + 1e-12
        assert float(hypergeom_tail_exact(M, N, k, t)) <= 2 * bound + 1e-12


def test_two_sided_tail_can_exceed_single_exponential():
    assert hypergeom_tail_exact(1, 2, 1, Fraction(1, 2)) == 1
    assert hypergeom_tail_bound(1, 2, 1, 0.5) < 1


def test_hoeffding():
    assert hoeffding_bound(100, 0) == 2
    with pytest.raises(DomainError):
        hoeffding_bound(0, 1)


def test_middle_probability():
    vals = {g: galvin_middle_probability(g) for g in range(1, 65)}
    for g, v in vals.items():
        assert v == hypergeom_pmf(2 * g, 4 * g, 2 * g, g)
    c1, c2 = fit_sqrt_constants(vals)
    assert 0 < c1 <= c2
    for g, v in vals.items():
        assert c1 - 1e-12 <= float(v) * math.sqrt(g) <= c2 + 1e-12
    # tends to sqrt(2/pi)
    assert abs(float(vals[64]) * 8 - math.sqrt(2 / math.pi)) < 0.01
