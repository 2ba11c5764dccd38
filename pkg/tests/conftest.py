import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from tracelab.trace_model import AssociationRecord, build_timelines

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def rec(node, loc, start, end):
    return AssociationRecord(node, loc, start, end)


T1_RECORDS = [
    rec("A", "X", 0, 100),
    rec("A", "Y", 100, 200),
    rec("A", "X", 300, 400),
    rec("B", "X", 50, 150),
    rec("C", "Y", 500, 600),
]


@pytest.fixture
def t1_records():
    return list(T1_RECORDS)


@pytest.fixture
def t1():
    return build_timelines(T1_RECORDS)


# criterion number -> verdict line, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
