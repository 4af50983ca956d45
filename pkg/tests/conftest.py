"""Shared fixtures and the session-wide decay-certificate audit.

Every certificate issued by ``metzler_hurwitz_certificate`` during the test
session is rechecked here by direct arithmetic, ``v^T M + eps v^T <= 0`` with
``v > 0`` and ``eps > 0``.  A failing certificate fails the test that caused
it.  The wrapper is installed at import time so that it also covers names
bound by ``from lure_verify import ...`` in test modules.
"""

from __future__ import annotations

import functools
import os

import numpy as np
import pytest
from hypothesis import settings

import lure_verify
import lure_verify.linalg as la

# reproducible by default; HYPOTHESIS_PROFILE=explore draws fresh examples
settings.register_profile("repro", derandomize=True, deadline=None)
settings.register_profile("explore", deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))

AUDIT = {"issued": 0, "failed": 0}
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

_original = la.metzler_hurwitz_certificate


def _recheck(cert, m) -> None:
    v = np.asarray(cert.v, dtype=np.float64)
    M = np.asarray(m, dtype=np.float64)
    lhs = v @ M + cert.epsilon * v
    ok = bool(np.all(v > 0) and cert.epsilon > 0 and np.all(lhs <= 0))
    AUDIT["issued"] += 1
    if not ok:
        AUDIT["failed"] += 1
        raise AssertionError(f"issued certificate fails recheck: v^T M + eps v^T = {lhs}")


@functools.wraps(_original)
def _audited(m, *args, **kwargs):
    cert = _original(m, *args, **kwargs)
    _recheck(cert, m)
    return cert


la.metzler_hurwitz_certificate = _audited
lure_verify.metzler_hurwitz_certificate = _audited


@pytest.fixture
def record_acceptance():
    """Record one acceptance criterion outcome for the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    return record


@pytest.fixture
def certificate_audit():
    return AUDIT


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not AUDIT["issued"]:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
    tr.write_line(f"decay certificates audited this session: {AUDIT['issued']} "
                  f"issued, {AUDIT['failed']} failed recheck")


@pytest.fixture
def demo_system():
    return lure_verify.load_lure_system(lure_verify.fixture_path("demo_2x2"))


@pytest.fixture
def wide_system():
    return lure_verify.load_lure_system(lure_verify.fixture_path("demo_2x2_wide"))
