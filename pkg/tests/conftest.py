import numpy as np
import pytest

from rmtde.channel_models import build_scenario

_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the terminal summary, then assert."""

    def _report(criterion: str, ok: bool, detail: str) -> None:
        line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: (len(s.split()[0]), s)):
            terminalreporter.write_line(line)


@pytest.fixture
def iid_scenario():
    def make(N, n, K=1, **kw):
        return build_scenario(N, [n] * K, **kw)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
