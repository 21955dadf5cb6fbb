import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aeroflex.sim import config  # noqa: E402
from aeroflex.sim.compare import run_variants  # noqa: E402


@pytest.fixture(scope="session")
def reduced_comparison():
    """All four solver columns on the reduced plate (shared, a few minutes)."""
    return run_variants(config.preset("reduced"))


@pytest.fixture(scope="session")
def tiny_config():
    return config.preset("reduced").replace(m_s=4, m_a=4, n_a=1, t_final=10 * 0.25 / 45)


ACCEPTANCE = {}


def record(criterion: str, ok: bool, detail: str) -> bool:
    """Log one acceptance line; shown again in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
