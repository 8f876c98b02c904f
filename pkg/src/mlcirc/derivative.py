"""Reverse-mode (Baur-Strassen) derivative circuit for syntactically
multilinear circuits.

Every gate v gets an adjoint D_v = d(output)/d(v), built top-down: the
root's adjoint is 1, a sum gate passes its adjoint to both children, and
a product gate w = a*b passes D_w*b to a and D_w*a to b. Adjoints from
several parents are summed. The derivative in x_i is the sum of the
adjoints of the leaves labelled x_i.

The resulting circuit is required to satisfy four properties, and they
are re-checked on every construction instead of being assumed:

1. output i computes d f / d x_i,
2. size <= 5 * size of the source circuit,
3. syntactic multilinearity,
4. x_i does not occur below output i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from mlcirc.circuit import EXPAND_GUARD, Circuit, Gate, expand_all
from mlcirc.errors import DomainError, InvariantError, PreconditionError

SIZE_FACTOR = 5


@dataclass(frozen=True)
class DerivativeCircuit:
    base: Circuit
    origin_size: int
    source_poly: object = field(default=None, compare=False, repr=False)
    checks: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        checks = audit(self.base, self.origin_size, self.source_poly)
        object.__setattr__(self, "checks", checks)
        bad = [k for k, v in checks.items() if v is False]
        if bad:
            raise InvariantError(f"derivative circuit violates {', '.join(bad)}")

    @property
    def n(self) -> int:
        return self.base.n

    def output(self, i: int) -> int:
        """Gate computing d f / d x_i (1-based)."""
        return self.base.outputs[i - 1]

    def report(self) -> dict:
        return {
            "n": self.n,
            "origin_size": self.origin_size,
            "size": self.base.size(),
            "size_ratio": self.base.size() / self.origin_size,
            "checks": dict(self.checks),
        }


def audit(dc: Circuit, origin_size: int, source_poly=None) -> dict:
    """Evaluate the four properties; ``None`` marks a check that was skipped."""
    n = dc.n
    checks: dict = {}
    checks["n_outputs"] = len(dc.outputs) == n
    checks["size_bound"] = dc.size() <= SIZE_FACTOR * origin_size
    checks["syntactically_multilinear"] = dc.is_syntactically_multilinear()[0]
    xs = dc.var_sets()
    checks["x_i_not_below_output_i"] = all(
        not xs[o] >> (i - 1) & 1 for i, o in enumerate(dc.outputs, start=1)
    )
    if source_poly is not None and checks["syntactically_multilinear"] and n <= EXPAND_GUARD:
        polys = expand_all(dc, list(dc.outputs))
        checks["computes_derivatives"] = all(
            polys[o] == source_poly.derivative(i) for i, o in enumerate(dc.outputs, start=1)
        )
    else:
        checks["computes_derivatives"] = None
    return checks


class _Emitter:
    def __init__(self, ctx):
        self.ctx = ctx
        self.gates: list[Gate] = []
        self._one: int | None = None
        self._zero: int | None = None

    def emit(self, **kw) -> int:
        gid = len(self.gates)
        self.gates.append(Gate(gid, **kw))
        return gid

    def one(self) -> int:
        if self._one is None:
            self._one = self.emit(op="const", value=self.ctx.one)
        return self._one

    def zero(self) -> int:
        if self._zero is None:
            self._zero = self.emit(op="const", value=self.ctx.zero)
        return self._zero


ONE = -1  # adjoint marker for the constant 1, materialized only when needed


def bs_transform(c: Circuit, check_expansion: bool = True) -> DerivativeCircuit:
    """Circuit with n outputs, the i-th computing d f / d x_i."""
    c.require_valid()
    if len(c.outputs) != 1:
        raise PreconditionError(f"expected a single output, got {len(c.outputs)}")
    ok, bad = c.is_syntactically_multilinear()
    if not ok:
        raise PreconditionError(f"input is not syntactically multilinear (gate {bad})")
    root = c.outputs[0]
    order = c.topo_order([root])
    em = _Emitter(c.ctx)

    copy: dict[int, int] = {}
    for gid in order:
        g = c.gate(gid)
        if g.is_leaf:
            copy[gid] = em.emit(op=g.op, var=g.var, value=g.value)
        else:
            copy[gid] = em.emit(op=g.op, left=copy[g.left], right=copy[g.right])

    def materialize(a: int) -> int:
        return em.one() if a == ONE else a

    def times(adj: int, other: int) -> int:
        if adj == ONE:
            return other
        return em.emit(op="mul", left=adj, right=other)

    contrib: dict[int, list[int]] = {gid: [] for gid in order}
    contrib[root].append(ONE)
    adjoint: dict[int, int] = {}
    for gid in reversed(order):
        parts = contrib[gid]
        acc = parts[0]
        for nxt in parts[1:]:
            acc = em.emit(op="add", left=materialize(acc), right=materialize(nxt))
        adjoint[gid] = acc
        g = c.gate(gid)
        if g.op == "add":
            contrib[g.left].append(acc)
            contrib[g.right].append(acc)
        elif g.op == "mul":
            contrib[g.left].append(times(acc, copy[g.right]))
            contrib[g.right].append(times(acc, copy[g.left]))

    leaves_of: dict[int, list[int]] = {}
    for gid in order:
        g = c.gate(gid)
        if g.op == "var":
            leaves_of.setdefault(g.var, []).append(gid)
    outputs = []
    for i in range(1, c.n + 1):
        ls = leaves_of.get(i)
        if not ls:
            outputs.append(em.zero())
            continue
        acc = adjoint[ls[0]]
        for leaf in ls[1:]:
            acc = em.emit(op="add", left=materialize(acc), right=materialize(adjoint[leaf]))
        outputs.append(materialize(acc))

    raw = Circuit(c.n, c.ctx, tuple(em.gates), tuple(outputs))
    cleaned = prune(raw)
    source = None
    if check_expansion and c.n <= EXPAND_GUARD:
        source = c.expand(root)
    return DerivativeCircuit(cleaned, c.size(), source)


def prune(c: Circuit) -> Circuit:
    """Drop gates that reach no output and renumber densely in topological order."""
    order = c.topo_order(c.outputs)
    new_id = {old: k for k, old in enumerate(order)}
    gates = []
    for old in order:
        g = c.gate(old)
        if g.is_leaf:
            gates.append(Gate(new_id[old], g.op, g.var, g.value))
        else:
            gates.append(Gate(new_id[old], g.op, left=new_id[g.left], right=new_id[g.right]))
    return Circuit(c.n, c.ctx, tuple(gates), tuple(new_id[o] for o in c.outputs))


def reachable_outputs(dc: DerivativeCircuit, v: int) -> set[int]:
    """C_v: indices i such that gate v lies below output i."""
    base = dc.base
    if v not in base:
        raise DomainError(f"no gate {v}")
    cv = {i for i, o in enumerate(base.outputs, start=1) if v in base.cone([o])}
    xv = base.var_sets()[v].bit_count()
    if len(cv) > dc.n - xv:
        raise InvariantError(f"gate {v} reaches {len(cv)} outputs but |X_v| = {xv}")
    return cv


def all_reachable_outputs(dc: DerivativeCircuit) -> dict[int, set[int]]:
    """C_v for every gate at once (one cone walk per output)."""
    base = dc.base
    out: dict[int, set[int]] = {g: set() for g in base.ids}
    for i, o in enumerate(base.outputs, start=1):
        for g in base.cone([o]):
            out[g].add(i)
    return out
