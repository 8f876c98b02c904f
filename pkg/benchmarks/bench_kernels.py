"""Time the Cython kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run on the same inputs under both backends; results are
compared before timings are reported.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from mlcirc import kernels
from mlcirc.setfam import balanced_masks

P = 2_147_483_647  # 2^31 - 1, the largest kernel prime


def _cases(rng: np.random.Generator):
    dense = rng.integers(0, P, size=(128, 128), dtype=np.int64)
    low_rank = (rng.integers(0, 101, size=(96, 20)) @ rng.integers(0, 101, size=(20, 96))) % 101
    n = 16
    fam = np.array([int(m) for m in rng.integers(1, 1 << n, size=12)], dtype=np.uint64)
    parts = np.array([y for y in balanced_masks(10) if y & 1], dtype=np.uint64)
    cands = np.array([s for s in range(1, 1 << 10) if 2 <= s.bit_count() <= 5], dtype=np.uint64)
    return {
        "rank_modp 128x128 mod 2^31-1": lambda k: k.rank_modp(dense.copy(), P),
        "rank_modp 96x96 rank 20 mod 101": lambda k: k.rank_modp(low_rank.astype(np.int64), 101),
        f"first_unbalancing n={n}, all C({n},{n // 2})": lambda k: k.first_unbalancing(
            fam, n, (1 << (n // 2)) - 1, math.comb(n, n // 2), 3),
        f"coverage_table {len(cands)}x{len(parts)}": lambda k: k.coverage_table(cands, parts, 0),
    }


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def _time(fn, repeat: int) -> tuple[float, object]:
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    try:
        cy = kernels.backend("cython")
    except ImportError:
        print("Cython extension not built; run `python3 setup.py build_ext --inplace`")
        return 1
    py = kernels.backend("python")
    print(f"{'kernel':<44} {'python s':>10} {'cython s':>10} {'speedup':>9}")
    for name, fn in _cases(np.random.default_rng(args.seed)).items():
        tp, rp = _time(lambda: fn(py), args.repeat)
        tc, rc = _time(lambda: fn(cy), args.repeat)
        if not _same(rp, rc):
            print(f"{name}: backends disagree")
            return 1
        print(f"{name:<44} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
