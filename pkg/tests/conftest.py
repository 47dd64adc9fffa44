import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# One human-readable verdict line per acceptance criterion, echoed after
# the test summary.  test_acceptance.py appends (criterion, ok, detail)
# triples; several tests may contribute clauses to the same criterion.
ACCEPTANCE = {}


def record_acceptance(criterion: int, ok: bool, detail: str):
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[crit]
        status = "PASS" if all(ok for ok, _ in clauses) else "FAIL"
        detail = "; ".join(d for _, d in clauses)
        terminalreporter.write_line(f"criterion {crit:2d} [{status}] {detail}")
