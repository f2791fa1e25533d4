import math

import numpy as np
import pytest

PHI = (1 + math.sqrt(5)) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str = "") -> bool:
    """Store one acceptance line; printed in the terminal summary."""
    prev = ACCEPTANCE.get(criterion)
    ok = bool(ok) and (prev is None or prev[0])
    text = detail if prev is None else f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (ok, text)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
