"""Acceptance criteria 1-12, one test each.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line; the lines are also
collected into the terminal summary so they appear together at the end of
the run.  Failures are reported as measured, never relaxed.
"""

import pytest

from nlsbirkhoff.acceptance import CRITERIA

ACCEPTANCE_LINES: list[str] = []


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1))
def test_criterion(ctx, number):
    res = CRITERIA[number - 1](ctx)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, f"{line}\n{res.note}"
