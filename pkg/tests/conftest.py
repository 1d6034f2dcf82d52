import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria register their verdicts here; printed in the terminal summary
CRITERIA = {}


def record_criterion(number: int, name: str, ok: bool, detail: str):
    line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} - {detail}"
    CRITERIA[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
