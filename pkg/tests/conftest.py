"""Collects the acceptance verdicts and prints them once at the end of the run."""

import contextlib

import pytest

VERDICTS = []


@contextlib.contextmanager
def _record(label, detail):
    try:
        yield detail
    except BaseException as exc:
        extra = "; ".join(f"{k}={v}" for k, v in detail.items())
        msg = f"{type(exc).__name__}: {exc}".splitlines()[0]
        VERDICTS.append((label, "FAIL", f"{msg}{' | ' + extra if extra else ''}"))
        print(f"ACCEPTANCE {label}: FAIL ({msg})")
        raise
    else:
        extra = "; ".join(f"{k}={v}" for k, v in detail.items())
        VERDICTS.append((label, "PASS", extra))
        print(f"ACCEPTANCE {label}: PASS ({extra})")


@pytest.fixture
def criterion():
    """``with criterion("3") as info: ...`` records PASS/FAIL for that label.

    Entries put into ``info`` are echoed next to the verdict.
    """
    return lambda label: _record(label, {})


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in VERDICTS:
        terminalreporter.write_line(f"criterion {label:<20} {verdict}  {detail}")
