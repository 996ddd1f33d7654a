import time
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from datadiss import lmi

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SUITE_BUDGET_S = 300.0
KERNEL_TOL = 1e-7


class KernelAudit:
    """Re-checks every certified solver outcome with a plain eigenvalue computation."""

    def __init__(self):
        self.certified = 0
        self.violations: list[tuple[str, str, float]] = []

    def record(self, problem, out):
        if not out.status.ok:
            return
        self.certified += 1
        for con in problem.all_constraints():
            F = con.expr.evaluate(out.assignment)
            lam = float(np.linalg.eigvalsh(0.5 * (F + F.T))[-1])
            if lam > KERNEL_TOL * con.coef_scale():
                self.violations.append((problem.name, con.name, lam / con.coef_scale()))


AUDIT = KernelAudit()
_START = time.perf_counter()
_solve = lmi.solve


def _audited_solve(problem, settings=None):
    out = _solve(problem, settings)
    AUDIT.record(problem, out)
    return out


lmi.solve = _audited_solve

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _START
    ok = not AUDIT.violations and elapsed <= SUITE_BUDGET_S
    ACCEPTANCE_LINES.append(
        f"[{'PASS' if ok else 'FAIL'}] criterion 9 (whole session): {AUDIT.certified} certified "
        f"outcomes re-checked, {len(AUDIT.violations)} violations, suite time {elapsed:.0f} s "
        f"(budget {SUITE_BUDGET_S:.0f} s)")
    if not ok and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
