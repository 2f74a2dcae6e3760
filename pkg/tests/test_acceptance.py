"""Acceptance criteria 1-12; every check prints one PASS/FAIL line."""
import pytest

from bayessep.validation import CHECKS


@pytest.mark.parametrize("criterion", sorted(CHECKS))
def test_criterion(criterion, capsys):
    results = CHECKS[criterion]()
    with capsys.disabled():
        print()
        for r in results:
            print("   ", r.line())
    failed = [r.line() for r in results if not r.passed]
    assert not failed, "\n".join(failed)
