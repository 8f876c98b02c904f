"""The ten acceptance criteria, each at its stated tolerance and time limit."""

from __future__ import annotations

import math
import os
import random
import time
from fractions import Fraction

import pytest

from cli_cases import CASES, GOLDEN, golden_argv, run
from mlcirc.algebra import FieldCtx
from mlcirc.derivative import SIZE_FACTOR, bs_transform
from mlcirc.fullrank import build, g_poly, pairing, verify_full_rank
from mlcirc.gen import random_family, random_sm_circuit
from mlcirc.leveled import decompose
from mlcirc.poly import Partition, PropertyReport, check_pdm_properties, random_poly, rank_yz
from mlcirc.polymethod import DESK, TINY, construct_A, construct_T, hegedus_verify, t_values
from mlcirc.setfam import (
    SetFamily,
    balanced_masks,
    covers,
    find_unbalancing_partition,
    fit_sqrt_constants,
    galvin_middle_probability,
    hypergeom_pmf,
    interval_tau_family,
    min_family_search,
)

pytestmark = pytest.mark.slow


def _pdm_suite(ctx, seed, instances=200, per_instance=50):
    rng = random.Random(seed)
    report = PropertyReport()
    for _ in range(instances):
        n = rng.choice([4, 6, 8, 10, 12])
        max_deg = rng.choice([None, 1, 2, 3, n // 2])
        f = random_poly(n, ctx, rng, density=rng.choice([0.1, 0.3, 0.6]), max_degree=max_deg)
        g = random_poly(n, ctx, rng, density=0.3, max_degree=max_deg)
        parts = balanced_masks(n)
        chosen = parts if len(parts) <= per_instance else rng.sample(parts, per_instance)
        for y in chosen:
            check_pdm_properties([f, g], Partition(n, y), rng, report)
    return report


def test_1_pdm_properties(acceptance):
    t0 = time.perf_counter()
    reports = {str(ctx): _pdm_suite(ctx, 1) for ctx in (FieldCtx.prime(101), FieldCtx.rational())}
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports.values()) and elapsed <= 120
    checks = {k: sum(v["checked"] for v in r.items.values()) for k, r in reports.items()}
    acceptance(1, ok, "PDM rank properties 1-5, F_101 and Q", f"checks {checks}, {elapsed:.1f}s / 120s")
    for r in reports.values():
        assert r.passed, r.items
    assert elapsed <= 120


def test_2_derivative_transform(acceptance):
    t0 = time.perf_counter()
    rng = random.Random(2)
    failures = []
    for k in range(100):
        n = rng.randint(2, 10)
        ctx = rng.choice([FieldCtx.rational(), FieldCtx.prime(101)])
        c = random_sm_circuit(n, rng.randint(n + 1, 60), ctx, rng)
        dc = bs_transform(c)
        f = c.expand()
        xs = dc.base.var_sets()
        ok = dc.base.size() <= SIZE_FACTOR * c.size() and dc.base.is_syntactically_multilinear()[0]
        for i in range(1, n + 1):
            out = dc.output(i)
            ok &= dc.base.expand(out) == f.restrict(i, 1) - f.restrict(i, 0)
            ok &= not xs[out] >> (i - 1) & 1
        if not ok:
            failures.append(k)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed <= 60
    acceptance(2, ok, "derivative circuit: 100 random circuits, four properties", f"{elapsed:.1f}s / 60s")
    assert not failures and elapsed <= 60


def test_3_full_rank(acceptance):
    t0 = time.perf_counter()
    q = FieldCtx.rational()
    ok = True
    for n in (2, 4, 6, 8, 10):
        rep = verify_full_rank(build(n), "indicator", threads=1)
        ok &= rep["passed"] and rep["partitions"] == math.comb(n, n // 2)
        ok &= all(r["rank"] == 2 ** (n // 2) for r in rep["checked"])
    for n in (4, 6, 8):
        for y in balanced_masks(n):
            part = Partition(n, y)
            g = g_poly(n, pairing(n, y), q)
            ok &= rank_yz(g, part) == 2 ** (n // 2)
            ok &= all(rank_yz(g.derivative(i), part) == 2 ** (n // 2 - 1) for i in range(1, n + 1))
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed <= 180
    acceptance(3, ok, "full-rank polynomial: every partition n<=10, derivative ranks n<=8", f"{elapsed:.1f}s / 180s")
    assert ok


def test_4_galvin_desk_scale(acceptance):
    t0 = time.perf_counter()
    r4 = min_family_search(4, 0, 2, 2, exact_balance=True)
    r8 = min_family_search(8, 0, 4, 4, exact_balance=True)
    intervals = all(covers(interval_tau_family(n, tau), tau, strict=False)[0] for n in (8, 10, 12) for tau in (1, 2))
    elapsed = time.perf_counter() - t0
    ok = r4.m == 2 and r4.family is not None and r8.m is not None and r8.m < 8 and intervals and elapsed <= 600
    acceptance(4, ok, "Galvin search and interval covers",
               f"m(universe 4) = {r4.m} via {r4.family.as_lists()}, m(universe 8) = {r8.m}, {elapsed:.1f}s / 600s")
    assert ok


def test_5_hegedus(acceptance):
    t0 = time.perf_counter()
    r2 = hegedus_verify(2)
    t2 = time.perf_counter() - t0
    r3 = hegedus_verify(3)
    t3 = time.perf_counter() - t0 - t2
    ok = r2.passed and r3.passed and t2 <= 1 and t3 <= 60
    acceptance(5, ok, "vanishing-ideal containment for p = 2, 3", f"p=2 {t2:.2f}s / 1s, p=3 {t3:.2f}s / 60s")
    assert ok


def test_6_covers_unbalance_duality(acceptance):
    rng = random.Random(6)
    disagreements = 0
    covering = 0
    for _ in range(500):
        n = rng.choice([2, 4, 6, 8, 10, 12])
        fam = SetFamily(n, tuple(random_family(n, rng.randint(1, 6), rng))) if n > 2 else SetFamily(2, (1,))
        ok, _ = covers(fam, 1)
        found = find_unbalancing_partition(fam, 1, "exhaustive")
        covering += ok
        disagreements += ok == bool(found)
    acceptance(6, disagreements == 0, "covers vs unbalancing search on 500 families",
               f"{covering} covering, {500 - covering} not")
    assert disagreements == 0


def _a_ok(fam, tau, a, ctx, const):
    # independent re-check of the exclusion invariants
    if ctx.a_mask.bit_count() != a:
        return False
    for s in fam.sets:
        hit = (s & ctx.a_mask).bit_count()
        if hit > const.a_frac * s.bit_count():
            return False
        if s.bit_count() <= const.a_small * tau and hit:
            return False
    return True


def _t_ok(fam, tau, p, t_mask, ctx):
    if t_mask.bit_count() != 3 * p or t_mask & ctx.a_mask:
        return False
    tb = t_mask | ctx.b_mask
    for s in fam.sets:
        k = s.bit_count()
        for t in t_values(k, tau, general=True):
            if ((tb & s).bit_count() - k // 2 - t) % p == 0:
                return False
    return True


def test_7_randomized_constructors(acceptance):
    rng = random.Random(7)
    n = 10**4
    a_stats = {"ok": 0, "failed": 0}
    a_bad = 0
    for run_ in range(100):
        fam = SetFamily(n, tuple(random_family(n, rng.randint(1, 50), rng, 2, n - 2)))
        ctx = construct_A(fam, 1, 20, seed=run_, const=DESK)
        a_stats["ok" if ctx else "failed"] += 1
        if ctx and not _a_ok(fam, 1, 20, ctx, DESK):
            a_bad += 1
    t_stats = {}
    t_bad = 0
    for p in (5, 7):
        stats = {"ok": 0, "abort": 0, "postcondition_failed": 0, "A_failed": 0}
        for run_ in range(100):
            rr = random.Random(1000 * p + run_)
            n_t = 4 * p + 2 * rr.randint(0, 1)
            fam = SetFamily(n_t, tuple(random_family(n_t, rr.randint(1, 4), rr, 2, n_t // 2)))
            ctx = construct_A(fam, 1, n_t - 4 * p, seed=run_, const=TINY, p=p)
            if not ctx:
                stats["A_failed"] += 1
                continue
            res = construct_T(fam, 1, p, ctx, seed=run_, const=TINY)
            stats[res.status] += 1
            if res and not _t_ok(fam, 1, p, res.t_mask, ctx):
                t_bad += 1
        t_stats[p] = stats
    ok = a_bad == 0 and t_bad == 0
    acceptance(7, ok, "every returned A and T passes its verifier",
               f"A at n=1e4: {a_stats}; T: {t_stats}; rates are logged only, the probability "
               "bounds need parameters far beyond desk scale")
    assert ok


def test_8_decomposition(acceptance):
    rng = random.Random(8)
    bad = 0
    nonempty = 0
    for _ in range(50):
        n = rng.choice([4, 6, 8, 10])
        ctx = rng.choice([FieldCtx.rational(), FieldCtx.prime(7)])
        c = random_sm_circuit(n, rng.randint(n + 5, 50), ctx, rng)
        dec = decompose(c, 1)
        total = dec.residual
        for g, h in dec.pairs:
            if g.support() & h.support():
                bad += 1
            total = total + g * h
        bad += total != c.expand()
        nonempty += bool(dec.pairs)
    acceptance(8, bad == 0, "f = sum g_j h_j + g on 50 random circuits", f"{nonempty} with lower-leveled gates")
    assert bad == 0


def test_9_probability(acceptance):
    rng = random.Random(9)
    sums_ok = True
    for _ in range(100):
        N = rng.randint(1, 200)
        M, k = rng.randint(0, N), rng.randint(0, N)
        sums_ok &= sum(hypergeom_pmf(M, N, k, i) for i in range(k + 1)) == 1
    vals = {g: galvin_middle_probability(g) for g in range(1, 65)}
    exact_ok = all(v == Fraction(math.comb(2 * g, g) ** 2, math.comb(4 * g, 2 * g)) for g, v in vals.items())
    c1, c2 = fit_sqrt_constants(vals)
    band_ok = all(c1 / math.sqrt(g) <= float(v) * (1 + 1e-12) and float(v) <= c2 / math.sqrt(g) * (1 + 1e-12)
                  for g, v in vals.items())
    ok = sums_ok and exact_ok and band_ok and 0 < c1 <= c2
    acceptance(9, ok, "hypergeometric pmf and middle-coefficient probability", f"c1 = {c1:.6f}, c2 = {c2:.6f}")
    assert ok


def test_10_determinism(acceptance, monkeypatch):
    monkeypatch.chdir(GOLDEN.parent.parent)
    mismatched = []
    for name, (argv, expect) in sorted(CASES.items()):
        golden = (GOLDEN / f"{name}.json").read_text()
        for threads in (1, 4):
            code, out, _ = run(golden_argv(argv, threads))
            if code != expect or out != golden:
                mismatched.append((name, threads))
    acceptance(10, not mismatched, "CLI goldens byte-identical for --threads 1 and 4",
               f"{len(CASES)} goldens" + (f", mismatched {mismatched}" if mismatched else ""))
    assert not mismatched


@pytest.mark.skipif(os.environ.get("MLCIRC_LONG") != "1", reason="set MLCIRC_LONG=1 for the p = 5 check")
def test_5b_hegedus_p5():
    assert hegedus_verify(5, allow_long=True).passed
