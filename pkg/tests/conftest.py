from __future__ import annotations

import random

import pytest

from mlcirc.algebra import FieldCtx

FIELDS = [FieldCtx.prime(2), FieldCtx.prime(101), FieldCtx.rational()]


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture(params=FIELDS, ids=str)
def ctx(request):
    return request.param


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    def record(num: int, ok: bool, title: str, detail: str = ""):
        ACCEPTANCE_LINES[num] = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(ACCEPTANCE_LINES[num])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
