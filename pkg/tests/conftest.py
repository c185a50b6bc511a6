import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def snp_names(p):
    return tuple(f"SNP.{j + 1}" for j in range(p))


# acceptance criteria report one line each; printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
