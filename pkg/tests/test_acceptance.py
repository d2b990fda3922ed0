"""The eleven acceptance criteria, one test and one PASS/FAIL line each.

The lines are printed as the checks run (visible with -s) and repeated in
the terminal summary.
"""
import pytest

from qfl import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("check", acceptance.CHECKS, ids=lambda f: f.__name__)
def test_criterion(ctx, check):
    result = check(ctx)
    ACCEPTANCE_LINES.append(result)
    print(result.line(), result.values)
    assert result.passed, result.values
