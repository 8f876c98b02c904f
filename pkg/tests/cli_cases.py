"""CLI golden cases shared by test_cli.py and the regeneration helper.

Regenerate after an intended output change with

    python3 tests/cli_cases.py --regen
"""

from __future__ import annotations

import contextlib
import io
import sys
from pathlib import Path

from mlcirc.cli import main

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
INPUTS = GOLDEN / "inputs"


def _in(name: str) -> str:
    return str((INPUTS / name).relative_to(HERE.parent))


# name -> (argv, expected exit code)
CASES = {
    "validate": (["validate", "-i", _in("matching8.json")], 0),
    "validate_bad": (["validate", "-i", _in("bad_circuit.json")], 1),
    "expand": (["expand", "-i", _in("random8.json")], 0),
    "eval": (["eval", "-i", _in("random8.json"), "--point", "1,2,3,4,5,6,7,8"], 0),
    "derive": (["derive", "-i", _in("matching8.json")], 0),
    "leveled": (["leveled", "-i", _in("random8.json"), "--k", "1"], 0),
    "decompose": (["decompose", "-i", _in("random8.json"), "--k", "1"], 0),
    "pdm_rank_y": (["pdm-rank", "-i", _in("poly6.json"), "--y", "1,3,5"], 0),
    "pdm_rank_all": (["pdm-rank", "-i", _in("matching8.json"), "--all"], 0),
    "construct_galvin": (["setfam", "construct", "--kind", "galvin", "--gn", "2"], 0),
    "construct_interval": (["setfam", "construct", "--kind", "interval", "--n", "12", "--tau", "2"], 0),
    "covers_non_strict": (["setfam", "covers", "-i", _in("interval8.json"), "--tau", "1", "--non-strict"], 0),
    "covers_strict": (["setfam", "covers", "-i", _in("interval8.json"), "--tau", "1", "--strict"], 0),
    "covers_fail": (["setfam", "covers", "-i", _in("pair12.json"), "--tau", "1"], 1),
    "search": (["setfam", "search", "--n", "8", "--tau", "1"], 0),
    "search_galvin": (["setfam", "search", "--n", "8", "--tau", "0", "--size-lo", "4", "--size-hi", "4", "--exact"], 0),
    "unbalance_exhaustive": (["setfam", "unbalance", "-i", _in("pair12.json"), "--tau", "1"], 0),
    "unbalance_none": (["setfam", "unbalance", "-i", _in("interval8.json"), "--tau", "2"], 1),
    "unbalance_randomized": (["setfam", "unbalance", "-i", _in("pair12.json"), "--tau", "1", "--mode", "randomized",
                              "--seed", "5"], 0),
    "hegedus_2": (["polymethod", "hegedus", "--p", "2"], 0),
    "hegedus_guard": (["polymethod", "hegedus", "--p", "7"], 3),
    "witness_special": (["polymethod", "witness", "-i", _in("pair12.json"), "--tau", "1", "--mode", "special",
                         "--seed", "1"], 0),
    "fullrank_build": (["fullrank", "build", "--n", "4"], 0),
    "fullrank_omega": (["fullrank", "build", "--n", "4", "--omega", "1,2,3,4", "--field", "101"], 0),
    "fullrank_verify": (["fullrank", "verify", "--n", "6"], 0),
    "fullrank_random": (["fullrank", "verify", "--n", "6", "--method", "random", "--seed", "2"], 0),
    "pipeline": (["pipeline", "-i", _in("matching8.json"), "--tau", "1", "--k", "1", "--seed", "0"], 0),
    "missing_seed": (["--require-seed", "fullrank", "verify", "--n", "4", "--method", "random"], 2),
    "bad_usage": (["setfam", "frobnicate"], 2),
}


def run(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def golden_argv(argv: list[str], threads: int) -> list[str]:
    return ["--canonical", "--threads", str(threads)] + argv


def regen():
    for name, (argv, expect) in CASES.items():
        code, out, _ = run(golden_argv(argv, 1))
        if code != expect:
            raise SystemExit(f"{name}: exit {code}, expected {expect}")
        (GOLDEN / f"{name}.json").write_text(out)
        print(f"wrote {name}.json ({len(out)} bytes)")


if __name__ == "__main__":
    if sys.argv[1:] != ["--regen"]:
        raise SystemExit("usage: python3 tests/cli_cases.py --regen")
    regen()
