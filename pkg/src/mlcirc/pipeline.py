"""The lower-bound argument run end to end on a concrete circuit.

derivative circuit -> leveled gates per output -> reachability audit ->
unbalancing partition for the lower-leveled supports -> decomposition and
rank collapse. Every stage is isolated: a failure is recorded in the
report and later stages that depend on it are skipped. Nothing asserts
the asymptotic bound; the chain of inequalities is evaluated on the
numbers at hand and re-derived from the raw per-output data.
"""

from __future__ import annotations

from mlcirc.circuit import Circuit
from mlcirc.derivative import all_reachable_outputs, bs_transform
from mlcirc.errors import MlcircError
from mlcirc.leveled import DECOMPOSE_GUARD, leveled_sets, rank_collapse_check
from mlcirc.poly import Partition, rank_yz
from mlcirc.setfam import EXHAUSTIVE_GUARD, SetFamily, find_unbalancing_partition

RANK_GUARD = 12
SIZE_BOUND_FACTOR = 1e5


def _masks_to_lists(mask: int) -> list[int]:
    return [i + 1 for i in range(mask.bit_length()) if mask >> i & 1]


def pipeline_lowerbound(c: Circuit, tau: int, k: int, seed: int = 0, threads: int = 1,
                        budget: int = 100_000) -> dict:
    n = c.n
    report: dict = {
        "input": {"n": n, "size": c.size(), "outputs": len(c.outputs), "tau": tau, "k": k},
        "stages": {},
    }
    stages = report["stages"]

    try:
        dc = bs_transform(c)
        stages["derivative"] = {"ok": True, **dc.report()}
    except MlcircError as e:
        stages["derivative"] = {"ok": False, "error": str(e)}
        dc = None

    if dc is not None:
        try:
            base = dc.base
            whole = leveled_sets(base, k)
            per_output = []
            cones = {}
            for i in range(1, n + 1):
                root = dc.output(i)
                cone = base.cone([root])
                cones[i] = cone
                lev = leveled_sets(base, k, root)
                u_i = sorted(u for u in whole.upper if u in cone)
                per_output.append({
                    "i": i,
                    "lower": sorted(lev.lower),
                    "upper": u_i,
                    "lower_subset_of_global": lev.lower <= whole.lower,
                })
            reach = all_reachable_outputs(dc)
            c_u = {u: sorted(reach[u]) for u in sorted(whole.upper)}
            stages["leveled"] = {
                "ok": True,
                "global_lower": sorted(whole.lower),
                "global_upper": sorted(whole.upper),
                "per_output": per_output,
                "C_u": {str(u): v for u, v in c_u.items()},
            }
            stages["leveled"]["chain"] = _chain(n, tau, k, per_output, c_u)
        except MlcircError as e:
            stages["leveled"] = {"ok": False, "error": str(e)}

    # the rank stages look at the source circuit itself
    try:
        whole_src = leveled_sets(c, k)
        supports = c.var_sets()
        fam_sets = sorted({supports[v] for v in whole_src.lower})
        fam = SetFamily(n, tuple(fam_sets))
        if n <= EXHAUSTIVE_GUARD:
            found = find_unbalancing_partition(fam, tau, "exhaustive", threads=threads)
            mode = "exhaustive"
        else:
            found = find_unbalancing_partition(fam, tau, "randomized", budget=budget, seed=seed)
            mode = "randomized"
        stages["partition_search"] = {
            "ok": True,
            "mode": mode,
            "lower_gates": sorted(whole_src.lower),
            "family": fam.as_lists(),
            "found": bool(found),
            "Y": found.elements if found else None,
            "tried": None if found else found.tried,
        }
    except MlcircError as e:
        stages["partition_search"] = {"ok": False, "error": str(e)}
        found = None

    if found and n <= min(RANK_GUARD, DECOMPOSE_GUARD):
        try:
            part = Partition(n, found.y_mask)
            stages["rank_collapse"] = {"ok": True, **rank_collapse_check(c, tau, k, part)}
        except MlcircError as e:
            stages["rank_collapse"] = {"ok": False, "error": str(e)}
    else:
        stages["rank_collapse"] = {"ok": None, "reason": "no partition" if not found else f"n > {RANK_GUARD}"}

    if n <= RANK_GUARD and n % 2 == 0:
        try:
            ref = Partition(n, (1 << (n // 2)) - 1)
            stages["reference_rank"] = {"ok": True, "Y": _masks_to_lists(ref.y_mask),
                                        "rank": rank_yz(c.expand(), ref), "full": 2 ** (n // 2)}
        except MlcircError as e:
            stages["reference_rank"] = {"ok": False, "error": str(e)}

    report["self_check"] = validate_report(report)
    return report


def _chain(n: int, tau: int, k: int, per_output: list, c_u: dict) -> dict:
    lhs = n * n / (SIZE_BOUND_FACTOR * tau)
    sum_l = sum(len(r["lower"]) for r in per_output)
    sum_u = sum(len(r["upper"]) for r in per_output)
    sum_c = sum(len(v) for v in c_u.values())
    n_upper = len(c_u)
    return {
        "lhs": lhs,
        "sum_lower": sum_l,
        "twice_sum_upper": 2 * sum_u,
        "twice_sum_C": 2 * sum_c,
        "twice_upper_times_k": 2 * n_upper * k,
        "lhs_le_sum_lower": lhs <= sum_l,
        "sum_lower_le_twice_sum_upper": sum_l <= 2 * sum_u,
        "per_output_lower_le_twice_upper": all(len(r["lower"]) <= 2 * len(r["upper"]) for r in per_output),
        "sum_upper_eq_sum_C": sum_u == sum_c,
        "every_C_u_le_k": all(len(v) <= k for v in c_u.values()),
        "twice_sum_C_le_bound": 2 * sum_c <= 2 * n_upper * k,
    }


def validate_report(report: dict) -> list[str]:
    """Recompute every derived number from raw fields; return mismatches."""
    problems = []
    lev = report["stages"].get("leveled")
    if lev and lev.get("ok"):
        inp = report["input"]
        c_u = {int(u): v for u, v in lev["C_u"].items()}
        again = _chain(inp["n"], inp["tau"], inp["k"], lev["per_output"], c_u)
        if again != lev["chain"]:
            problems.append("leveled chain does not match its raw data")
        for r in lev["per_output"]:
            for u in r["upper"]:
                if r["i"] not in c_u.get(u, []):
                    problems.append(f"gate {u} listed upper for output {r['i']} but C_u misses it")
    rc = report["stages"].get("rank_collapse")
    if rc and rc.get("ok"):
        pairs_sum = sum(p["rank"] for p in rc["pairs"]) + rc["residual"]["rank"]
        if rc["subadditive_ok"] != (rc["rank_f"] <= pairs_sum):
            problems.append("subadditivity flag inconsistent")
        total = rc["ell"] * 2 ** (inp_half(report) - rc["tau"]) + rc["residual"]["bound"]
        if abs(total - rc["total_bound"]) > 1e-9 * max(1.0, total):
            problems.append("total bound inconsistent")
    return problems


def inp_half(report: dict) -> int:
    return report["input"]["n"] // 2
