import re

import numpy as np
import pytest
from hypothesis import settings

from dipolekit import curves as fc

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

THETA0 = np.pi / 3
TWO_PI = 2 * np.pi

_ACCEPTANCE = {}
_AC_NAME = re.compile(r"test_ac(\d+)_(\w+)")


@pytest.fixture
def cone_direction():
    return fc.cone(THETA0, 1.0, TWO_PI)


@pytest.fixture
def lemma1_cone():
    return fc.cone(THETA0, 1.0, TWO_PI).with_magnitude(np.cos(THETA0))


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    match = _AC_NAME.search(report.nodeid)
    if not match:
        return
    key = (int(match.group(1)), match.group(2))
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _ACCEPTANCE[key] = _ACCEPTANCE.get(key, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, name), ok in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"AC{number:<3d}{'PASS' if ok else 'FAIL'}  {name.replace('_', ' ')}")
