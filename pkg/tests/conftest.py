import pytest

from targetzone.model import ModelParams


@pytest.fixture
def unit():
    return ModelParams(sigma=1.0, gamma=1.0, kappa=1.0, c=0.0, s0=0.5, horizon=1.0)


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
