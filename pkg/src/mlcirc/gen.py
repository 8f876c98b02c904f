"""Seeded random instances for tests, benchmarks and the acceptance suite."""

from __future__ import annotations

import random

from mlcirc.algebra import FieldCtx
from mlcirc.circuit import Circuit, Gate


def random_sm_circuit(n: int, n_gates: int, ctx: FieldCtx, rng: random.Random, const_prob: float = 0.1,
                      mul_prob: float = 0.5) -> Circuit:
    """Random syntactically multilinear circuit with a single output.

    Leaves for x_1..x_n come first (so every variable is available); a
    product whose children share a variable is turned into a sum.
    """
    gates: list[Gate] = []
    xs: list[int] = []
    for i in range(1, n + 1):
        gates.append(Gate(len(gates), "var", var=i))
        xs.append(1 << (i - 1))
    while len(gates) < n_gates:
        gid = len(gates)
        if rng.random() < const_prob:
            gates.append(Gate(gid, "const", value=ctx(rng.randint(-3, 5))))
            xs.append(0)
            continue
        # bias toward recent gates so the output depends on most of the circuit
        a = _pick(rng, gid)
        b = _pick(rng, gid)
        op = "mul" if rng.random() < mul_prob and not xs[a] & xs[b] else "add"
        gates.append(Gate(gid, op, left=a, right=b))
        xs.append(xs[a] | xs[b])
    return Circuit(n, ctx, tuple(gates), (len(gates) - 1,))


def _pick(rng: random.Random, hi: int) -> int:
    if rng.random() < 0.6:
        return rng.randrange(max(0, hi - 6), hi)
    return rng.randrange(hi)


def random_family(n: int, m: int, rng: random.Random, size_lo: int = 1, size_hi: int | None = None) -> list[int]:
    """m random subsets of [n] (bitmasks) with sizes uniform in [size_lo, size_hi]."""
    size_hi = n - 1 if size_hi is None else size_hi
    out = []
    for _ in range(m):
        k = rng.randint(size_lo, size_hi)
        mask = 0
        for i in rng.sample(range(n), k):
            mask |= 1 << i
        out.append(mask)
    return out
