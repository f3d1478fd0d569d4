"""Acceptance criteria at their stated tolerances; one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""
import pytest

from chs_dynbc import acceptance


@pytest.mark.parametrize("name", list(acceptance.CRITERIA))
def test_criterion(name):
    result = acceptance.run_criterion(name)
    print(result.line())
    assert result.ok, result.line()
    assert result.seconds <= result.budget, f"{name} exceeded its time budget: {result.line()}"


def test_all_eleven_registered():
    assert len(acceptance.CRITERIA) == 11
