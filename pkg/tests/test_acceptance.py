"""Full-size acceptance run: every criterion at its pinned tolerance.

One pass/fail line per criterion is printed in the "acceptance criteria"
section of the pytest terminal summary.
"""

import pytest

from targetzone import acceptance


@pytest.fixture(scope="module")
def report(pytestconfig):
    results = acceptance.run(quick=False)
    pytestconfig.acceptance_lines = [r.line() for r in results]
    return {r.number: r for r in results}


@pytest.mark.slow
@pytest.mark.parametrize("number", [c[0] for c in acceptance.CRITERIA])
def test_criterion(report, number):
    result = report[number]
    print(result.line())
    assert result.passed, result.line()


def test_corrupted_tolerance_is_isolated():
    results = acceptance.run(quick=True, only=[1, 2, 3], overrides={2: {"tol": -1.0}})
    assert [r.passed for r in results] == [True, False, True]


def test_crash_is_reported_as_failure(monkeypatch):
    def boom(ctx):
        raise RuntimeError("injected")

    monkeypatch.setattr(acceptance, "CRITERIA", [(1, "boom", boom)])
    (result,) = acceptance.run(only=[1])
    assert not result.passed and "injected" in result.detail


def test_quick_mode_tolerances():
    ctx = acceptance.Context(quick=True)
    assert ctx.tol[11]["ratio_lo"] < acceptance.TOLERANCES[11]["ratio_lo"]
    assert acceptance.Context().tol == acceptance.TOLERANCES


def test_quick_suite_passes():
    import time

    start = time.perf_counter()
    results = acceptance.run(quick=True)
    elapsed = time.perf_counter() - start
    print(f"quick suite: {elapsed:.1f}s")
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]
