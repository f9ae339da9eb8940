"""Numbered acceptance criteria, one test each.

Every test prints its ``PASS``/``FAIL`` line straight to the terminal (the
line is visible without ``-s``).  Criteria 2 and 3 take minutes on one core
and carry the ``slow`` marker; deselect them with ``-m "not slow"``.
Running this file as a script prints the full table.
"""
import pytest

from symlab.verify import CRITERIA, run_suite

SLOW = {2, 3}


def _param(check):
    marks = [pytest.mark.slow] if check.number in SLOW else []
    return pytest.param(check, id=f"criterion_{check.number}", marks=marks)


@pytest.mark.parametrize("check", [_param(c) for c in CRITERIA])
def test_criterion(check, capsys):
    res = check()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    results = run_suite(echo=print)
    raise SystemExit(0 if all(r.passed for r in results) else 1)
