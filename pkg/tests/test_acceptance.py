"""Acceptance criteria 1-8 at full budget; one pass/fail line per criterion is printed."""
import pytest

from fragwave.acceptance import Battery

CRITERIA = range(1, 9)


@pytest.fixture(scope="module")
def battery():
    return Battery("full")


@pytest.mark.parametrize("number", CRITERIA)
def test_criterion(battery, number, capsys):
    res = getattr(battery, f"criterion_{number}")()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
