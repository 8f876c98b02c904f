"""Arithmetic-circuit DAG: fan-in 0 leaves (variables, constants) and fan-in 2
sum/product gates, with any number of outputs.

A ``Circuit`` may be constructed in an invalid state (e.g. straight from a
file); ``validate`` lists the problems and every analysis calls
``require_valid`` first.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from mlcirc.algebra import FieldCtx
from mlcirc.errors import CircuitError, DomainError, ResourceError
from mlcirc.poly import MultilinearPoly, indices_of

OPS = ("var", "const", "add", "mul")
EXPAND_GUARD = 24


@dataclass(frozen=True)
class Gate:
    id: int
    op: str
    var: int | None = None
    value: object = None
    left: int | None = None
    right: int | None = None

    @property
    def children(self) -> tuple[int, ...]:
        return tuple(c for c in (self.left, self.right) if c is not None)

    @property
    def is_leaf(self) -> bool:
        return self.op in ("var", "const")


@dataclass(frozen=True)
class Circuit:
    n: int
    ctx: FieldCtx
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {g.id: g for g in self.gates})

    def gate(self, gid: int) -> Gate:
        return self._by_id[gid]

    def __contains__(self, gid) -> bool:
        return gid in self._by_id

    @property
    def ids(self) -> list[int]:
        return sorted(self._by_id)

    # -- structure ----------------------------------------------------
    def validate(self) -> list[tuple[int | None, str]]:
        return validate(self)

    def require_valid(self) -> None:
        errs = validate(self)
        if errs:
            raise CircuitError(errs)

    def topo_order(self, roots: Iterable[int] | None = None) -> list[int]:
        """Children before parents; ties broken by ascending gate id."""
        ids = self.cone(roots) if roots is not None else set(self._by_id)
        indeg = {g: 0 for g in ids}
        parents: dict[int, list[int]] = {g: [] for g in ids}
        for g in ids:
            for c in self._by_id[g].children:
                indeg[g] += 1
                parents[c].append(g)
        heap = [g for g, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            g = heapq.heappop(heap)
            order.append(g)
            for p in parents[g]:
                indeg[p] -= 1
                if indeg[p] == 0:
                    heapq.heappush(heap, p)
        if len(order) != len(ids):
            raise CircuitError([(None, "cycle detected")])
        return order

    def cone(self, roots: Iterable[int]) -> set[int]:
        """Gates with a directed path to some gate in ``roots`` (roots included)."""
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            g = stack.pop()
            if g in seen:
                continue
            seen.add(g)
            stack.extend(self._by_id[g].children)
        return seen

    def parents(self, within: set[int] | None = None) -> dict[int, list[int]]:
        ids = within if within is not None else set(self._by_id)
        out: dict[int, list[int]] = {g: [] for g in ids}
        for g in sorted(ids):
            for c in set(self._by_id[g].children):
                if c in out:
                    out[c].append(g)
        return out

    def size(self) -> int:
        return len(self.gates)

    def var_sets(self) -> dict[int, int]:
        """X_v for every gate, as a bitmask over the variables."""
        self.require_valid()
        xs: dict[int, int] = {}
        for gid in self.topo_order():
            g = self._by_id[gid]
            if g.op == "var":
                xs[gid] = 1 << (g.var - 1)
            elif g.op == "const":
                xs[gid] = 0
            else:
                xs[gid] = xs[g.left] | xs[g.right]
        return xs

    def multilinearity_violation(self) -> int | None:
        """First product gate (topological order) whose children share a variable."""
        xs = self.var_sets()
        for gid in self.topo_order():
            g = self._by_id[gid]
            if g.op == "mul" and xs[g.left] & xs[g.right]:
                return gid
        return None

    def is_syntactically_multilinear(self) -> tuple[bool, int | None]:
        v = self.multilinearity_violation()
        return v is None, v

    def is_semantically_multilinear(self) -> bool:
        self.require_valid()
        _guard(self.n)
        for poly in _expand_general(self).values():
            if any(e > 1 for mono in poly for _, e in mono):
                return False
        return True

    # -- evaluation -------------------------------------------------------
    def evaluate(self, point: Sequence, outputs: Sequence[int] | None = None) -> list:
        self.require_valid()
        if len(point) != self.n:
            raise DomainError(f"point has {len(point)} coordinates, expected {self.n}")
        ctx = self.ctx
        pt = [ctx(x) for x in point]
        outs = list(self.outputs if outputs is None else outputs)
        val: dict[int, object] = {}
        for gid in self.topo_order(outs):
            g = self._by_id[gid]
            if g.op == "var":
                val[gid] = pt[g.var - 1]
            elif g.op == "const":
                val[gid] = g.value
            elif g.op == "add":
                val[gid] = ctx.add(val[g.left], val[g.right])
            else:
                val[gid] = ctx.mul(val[g.left], val[g.right])
        return [val[o] for o in outs]

    def expand(self, output: int | None = None) -> MultilinearPoly:
        """Exact polynomial at ``output`` (default: the first output)."""
        self.require_valid()
        _guard(self.n)
        out = self.outputs[0] if output is None else output
        if out not in self._by_id:
            raise DomainError(f"no gate {out}")
        if self.is_syntactically_multilinear()[0]:
            return expand_all(self, [out])[out]
        poly = _expand_general(self, [out])[out]
        terms = {}
        for mono, c in poly.items():
            if any(e > 1 for _, e in mono):
                raise DomainError(f"gate {out} computes a non-multilinear polynomial")
            m = 0
            for v, _ in mono:
                m |= 1 << (v - 1)
            terms[m] = c
        return MultilinearPoly(self.n, self.ctx, dict(sorted(terms.items())))

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        gates = []
        for g in sorted(self.gates, key=lambda g: g.id):
            d: dict = {"id": g.id, "op": g.op}
            if g.op == "var":
                d["var"] = g.var
            elif g.op == "const":
                d["value"] = self.ctx.to_str(g.value)
            else:
                if g.left is not None:
                    d["left"] = g.left
                if g.right is not None:
                    d["right"] = g.right
            gates.append(d)
        return {"n": self.n, "field": self.ctx.to_json(), "gates": gates, "outputs": list(self.outputs)}

    def dumps(self, canonical: bool = True) -> str:
        if canonical:
            return json.dumps(self.to_json(), separators=(",", ":"))
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj: dict) -> "Circuit":
        try:
            n = int(obj["n"])
            ctx = FieldCtx.from_json(obj["field"])
            gates = []
            for d in obj["gates"]:
                op = d["op"]
                value = ctx(d["value"]) if op == "const" and "value" in d else None
                gates.append(Gate(int(d["id"]), op, d.get("var"), value, d.get("left"), d.get("right")))
            outputs = tuple(int(o) for o in obj["outputs"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CircuitError([(None, f"malformed circuit document: {exc}")]) from exc
        return cls(n, ctx, tuple(gates), outputs)


def validate(c: Circuit) -> list[tuple[int | None, str]]:
    errs: list[tuple[int | None, str]] = []
    seen: set[int] = set()
    for g in c.gates:
        if g.id in seen:
            errs.append((g.id, "duplicate gate id"))
        seen.add(g.id)
    for g in c.gates:
        if g.op not in OPS:
            errs.append((g.id, f"unknown op {g.op!r}"))
            continue
        if g.is_leaf:
            if g.left is not None or g.right is not None:
                errs.append((g.id, f"{g.op} gate must have in-degree 0"))
            if g.op == "var" and not (isinstance(g.var, int) and 1 <= g.var <= c.n):
                errs.append((g.id, f"variable index {g.var!r} outside 1..{c.n}"))
            if g.op == "const" and g.value is None:
                errs.append((g.id, "const gate without value"))
            continue
        if g.left is None or g.right is None:
            errs.append((g.id, f"{g.op} gate must have in-degree exactly 2"))
        for ch in g.children:
            if ch not in seen:
                errs.append((g.id, f"dangling child reference {ch}"))
    for o in c.outputs:
        if o not in seen:
            errs.append((None, f"output {o} is not a gate"))
    if not errs:
        cyc = _find_cycle(c)
        if cyc is not None:
            errs.append((cyc, "cycle through this gate"))
    return errs


def _find_cycle(c: Circuit) -> int | None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {g.id: WHITE for g in c.gates}
    for start in sorted(color):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(c.gate(start).children))]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                return nxt
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(c.gate(nxt).children)))
    return None


def _guard(n: int):
    if n > EXPAND_GUARD:
        raise ResourceError(f"expansion guarded to n <= {EXPAND_GUARD}, got n = {n}")


def expand_all(c: Circuit, roots: Sequence[int] | None = None) -> dict[int, MultilinearPoly]:
    """Multilinear expansion at every gate in the cone of ``roots``.

    Valid for syntactically multilinear circuits (products never share
    variables); raises DomainError otherwise.
    """
    ctx, n = c.ctx, c.n
    polys: dict[int, MultilinearPoly] = {}
    for gid in c.topo_order(roots):
        g = c.gate(gid)
        if g.op == "var":
            polys[gid] = MultilinearPoly.var(n, ctx, g.var)
        elif g.op == "const":
            polys[gid] = MultilinearPoly.constant(n, ctx, g.value)
        elif g.op == "add":
            polys[gid] = polys[g.left] + polys[g.right]
        else:
            polys[gid] = polys[g.left] * polys[g.right]
    return polys


def _expand_general(c: Circuit, roots: Sequence[int] | None = None) -> dict[int, dict]:
    # monomial = sorted tuple of (var, exponent); no multilinearity assumed
    ctx = c.ctx
    polys: dict[int, dict] = {}
    for gid in c.topo_order(roots):
        g = c.gate(gid)
        if g.op == "var":
            polys[gid] = {((g.var, 1),): ctx.one}
        elif g.op == "const":
            polys[gid] = {(): g.value} if g.value else {}
        elif g.op == "add":
            acc = dict(polys[g.left])
            for m, v in polys[g.right].items():
                acc[m] = ctx.add(acc[m], v) if m in acc else v
            polys[gid] = {m: v for m, v in acc.items() if v}
        else:
            acc = {}
            for m1, c1 in polys[g.left].items():
                for m2, c2 in polys[g.right].items():
                    e = dict(m1)
                    for v, k in m2:
                        e[v] = e.get(v, 0) + k
                    m = tuple(sorted(e.items()))
                    val = ctx.mul(c1, c2)
                    acc[m] = ctx.add(acc[m], val) if m in acc else val
            polys[gid] = {m: v for m, v in acc.items() if v}
    return polys


class CircuitBuilder:
    """Incremental construction with dense ids; n-ary sums/products are
    lowered to balanced binary trees immediately."""

    def __init__(self, n: int, ctx: FieldCtx, share_leaves: bool = True):
        self.n = n
        self.ctx = ctx
        self.share_leaves = share_leaves
        self.gates: list[Gate] = []
        self._leaf: dict[int, int] = {}

    def _add(self, **kw) -> int:
        gid = len(self.gates)
        self.gates.append(Gate(gid, **kw))
        return gid

    def var(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise DomainError(f"variable x{i} outside 1..{self.n}")
        if self.share_leaves and i in self._leaf:
            return self._leaf[i]
        gid = self._add(op="var", var=i)
        self._leaf[i] = gid
        return gid

    def const(self, value) -> int:
        return self._add(op="const", value=self.ctx(value))

    def add(self, a: int, b: int) -> int:
        return self._add(op="add", left=a, right=b)

    def mul(self, a: int, b: int) -> int:
        return self._add(op="mul", left=a, right=b)

    def _tree(self, items: Sequence[int], op) -> int:
        if not items:
            raise DomainError("empty n-ary gate")
        level = list(items)
        while len(level) > 1:
            nxt = [op(level[k], level[k + 1]) for k in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        return level[0]

    def sum(self, items: Sequence[int]) -> int:
        return self._tree(items, self.add)

    def prod(self, items: Sequence[int]) -> int:
        return self._tree(items, self.mul)

    def build(self, outputs: Sequence[int]) -> Circuit:
        c = Circuit(self.n, self.ctx, tuple(self.gates), tuple(outputs))
        c.require_valid()
        return c


def circuit_from_poly(f: MultilinearPoly) -> Circuit:
    """Straightforward sum-of-monomials circuit for ``f``."""
    b = CircuitBuilder(f.n, f.ctx)
    summands = []
    for m, c in sorted(f.terms.items()):
        factors = [b.var(i) for i in indices_of(m)]
        if c != f.ctx.one or not factors:
            factors.insert(0, b.const(c))
        summands.append(b.prod(factors))
    if not summands:
        summands.append(b.const(0))
    return b.build([b.sum(summands)])


def read_circuit(path) -> Circuit:
    with open(path) as fh:
        return Circuit.from_json(json.load(fh))
