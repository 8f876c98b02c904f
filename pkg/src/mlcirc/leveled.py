"""Lower/upper-leveled gates, the product decomposition they induce, and
the rank bookkeeping that turns an unbalancing partition into a rank
upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from mlcirc.circuit import Circuit, expand_all
from mlcirc.errors import DomainError, InvariantError, PreconditionError, ResourceError
from mlcirc.poly import MultilinearPoly, Partition, popcount, rank_yz

DECOMPOSE_GUARD = 20
DEFAULT_DEGREE_FACTOR = 200


@dataclass(frozen=True)
class LeveledSets:
    k: int
    lower: frozenset
    upper: frozenset

    def to_json(self) -> dict:
        return {"k": self.k, "lower": sorted(self.lower), "upper": sorted(self.upper)}


def leveled_sets(c: Circuit, k: int, root: int | None = None) -> LeveledSets:
    """Leveled gates of ``c`` (or of the subcircuit rooted at ``root``).

    lower: k < |X_u| < n-k with a parent of support >= n-k.
    upper: support >= n-k with a child in lower.
    """
    n = c.n
    if not 0 <= k or 2 * k >= n:
        raise DomainError(f"need 0 <= k < n/2, got k={k}, n={n}")
    xs = c.var_sets()
    within = c.cone([root]) if root is not None else set(c.ids)
    big = n - k
    lower = set()
    upper = set()
    for v in within:
        g = c.gate(v)
        if g.is_leaf or popcount(xs[v]) < big:
            continue
        for u in g.children:
            if k < popcount(xs[u]) < big:
                lower.add(u)
                upper.add(v)
    if len(lower) > 2 * len(upper):
        raise InvariantError("more than two lower-leveled gates per upper-leveled gate")
    return LeveledSets(k, frozenset(lower), frozenset(upper))


@dataclass
class Decomposition:
    """f = sum_j g_j * h_j + g, with h_j the polynomial at lower gate j."""

    gates: list[int]
    pairs: list[tuple[MultilinearPoly, MultilinearPoly]]
    residual: MultilinearPoly
    tau: int
    k: int
    degree_bound: int
    checks: dict = field(default_factory=dict)

    @property
    def residual_degree(self) -> int:
        return self.residual.degree()

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "tau": self.tau,
            "lower": self.gates,
            "pairs": [{"gate": v, "g": g.to_json(), "h": h.to_json()} for v, (g, h) in zip(self.gates, self.pairs)],
            "residual": self.residual.to_json(),
            "residual_degree": self.residual_degree,
            "degree_bound": self.degree_bound,
            "checks": self.checks,
        }


def decompose(c: Circuit, k: int, tau: int = 1, degree_bound: int | None = None) -> Decomposition:
    """Split the output polynomial along the lower-leveled gates.

    Each lower gate v_j (topological order) is replaced by a placeholder
    z_j. The resulting F(X, z) is multilinear in z, and with
    F_j = F(h_1..h_j, 0, ..., 0) the telescoping sum
    F_j - F_{j-1} = h_j * [z_j]F(h_1..h_{j-1}, z_j, 0..0) gives g_j;
    the residual is F(X, 0). The identity and the disjointness of g_j and
    h_j are then checked by full expansion.
    """
    c.require_valid()
    if len(c.outputs) != 1:
        raise PreconditionError("decompose needs a single-output circuit")
    ok, bad = c.is_syntactically_multilinear()
    if not ok:
        raise PreconditionError(f"circuit is not syntactically multilinear (gate {bad})")
    if c.n > DECOMPOSE_GUARD:
        raise ResourceError(f"decompose is guarded to n <= {DECOMPOSE_GUARD}")
    n, ctx = c.n, c.ctx
    root = c.outputs[0]
    degree_bound = DEFAULT_DEGREE_FACTOR * tau if degree_bound is None else degree_bound
    order = c.topo_order([root])
    lev = leveled_sets(c, k, root)
    lower = [v for v in order if v in lev.lower]
    ell = len(lower)
    width = n + ell
    zbit = {v: 1 << (n + j) for j, v in enumerate(lower)}

    h_polys = expand_all(c, [root])
    F: dict[int, MultilinearPoly] = {}
    for gid in order:
        g = c.gate(gid)
        if gid in zbit:
            F[gid] = MultilinearPoly(width, ctx, {zbit[gid]: ctx.one})
        elif g.op == "var":
            F[gid] = MultilinearPoly.var(width, ctx, g.var)
        elif g.op == "const":
            F[gid] = MultilinearPoly.constant(width, ctx, g.value)
        elif g.op == "add":
            F[gid] = F[g.left] + F[g.right]
        else:
            F[gid] = F[g.left] * F[g.right]
    top = F[root]

    xmask = (1 << n) - 1
    hs = [h_polys[v] for v in lower]
    pairs = []
    for j, v in enumerate(lower):
        later = 0
        for v2 in lower[j + 1 :]:
            later |= zbit[v2]
        acc = MultilinearPoly.zero(n, ctx)
        for m, coef in top.terms.items():
            if not m & zbit[v] or m & later:
                continue
            term = MultilinearPoly(n, ctx, {m & xmask: coef})
            for i in range(j):
                if m & zbit[lower[i]]:
                    term = term * hs[i]
            acc = acc + term
        pairs.append((acc, hs[j]))
    residual = MultilinearPoly(n, ctx, {m: coef for m, coef in top.terms.items() if not m >> n})

    f = h_polys[root]
    total = residual
    for g_j, h_j in pairs:
        total = total + g_j * h_j
    checks = {
        "identity": total == f,
        "disjoint": all(not g_j.support() & h_j.support() for g_j, h_j in pairs),
        "degree_ok": residual.degree() <= degree_bound,
    }
    dec = Decomposition(lower, pairs, residual, tau, k, degree_bound, checks)
    if not checks["identity"]:
        raise InvariantError("decomposition identity f = sum g_j h_j + g failed")
    if not checks["disjoint"]:
        j = next(j for j, (g_j, h_j) in enumerate(pairs) if g_j.support() & h_j.support())
        raise InvariantError(f"g_{j} and h_{j} share variables (lower gate {lower[j]})")
    return dec


def imbalance2(y_mask: int, s_mask: int) -> int:
    """2 * d_Y(S) as an integer."""
    return abs(2 * popcount(y_mask & s_mask) - popcount(s_mask))


def rank_collapse_check(c: Circuit, tau: int, k: int, part: Partition, dec: Decomposition | None = None) -> dict:
    """Evaluate both sides of the rank-collapse chain under ``part``.

    Nothing is asserted: the report lists, for every pair, its actual rank
    and the bounds implied by the imbalance of X_{v_j}; the residual's
    actual rank against the low-degree bound; and the total bound
    ell * 2^{n/2 - tau} + (n/2)^{deg g + 1} against rank_{Y,Z}(f).
    """
    if not part.is_balanced:
        raise DomainError("rank collapse is evaluated on a balanced partition")
    dec = dec or decompose(c, k, tau)
    n = c.n
    half = n // 2
    xs = c.var_sets()
    y, z = part.y_mask, part.z_mask
    pair_rows = []
    for v, (g_j, h_j) in zip(dec.gates, dec.pairs):
        s = xs[v]
        d = Fraction(imbalance2(y, s), 2)
        mult_exp = min(popcount(y & s), popcount(z & s)) + min(popcount(y & ~s), popcount(z & ~s))
        actual = rank_yz(g_j * h_j, part)
        pair_rows.append({
            "gate": v,
            "support_size": popcount(s),
            "imbalance": str(d),
            "tau_unbalanced": d >= tau,
            "rank": actual,
            "bound_multiplicative": 2 ** mult_exp,
            "bound_imbalance": 2 ** (half - float(d)),
            "within_bounds": actual <= 2 ** mult_exp <= 2 ** (half - float(d)),
        })
    deg_g = dec.residual_degree
    residual_bound = (n / 2) ** (deg_g + 1)
    residual_rank = rank_yz(dec.residual, part)
    f = c.expand()
    f_rank = rank_yz(f, part)
    ell = len(dec.pairs)
    total_bound = ell * 2 ** (half - tau) + residual_bound
    threshold = 2 ** (half - 1)
    sum_parts = sum(r["rank"] for r in pair_rows) + residual_rank
    return {
        "n": n,
        "tau": tau,
        "k": k,
        "partition": _mask_list(y),
        "pairs": pair_rows,
        "all_pairs_tau_unbalanced": all(r["tau_unbalanced"] for r in pair_rows),
        "residual": {"degree": deg_g, "rank": residual_rank, "bound": residual_bound,
                     "within_bound": residual_rank <= residual_bound},
        "ell": ell,
        "total_bound": total_bound,
        "rank_f": f_rank,
        "subadditive_ok": f_rank <= sum_parts,
        "rank_f_within_total_bound": f_rank <= total_bound,
        "threshold": threshold,
        "total_bound_below_threshold": total_bound < threshold,
        "rank_f_below_threshold": f_rank < threshold,
    }


def _mask_list(mask: int) -> list[int]:
    return [i + 1 for i in range(mask.bit_length()) if mask >> i & 1]
