import numpy as np
import pytest

from nlsbirkhoff.acceptance import Context


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    """Session-wide memo of kernel tensors and the normalization pipeline."""
    return Context(tmp_path_factory.mktemp("kernel_cache"), seed=0)


@pytest.fixture(scope="session")
def normal_form(ctx):
    return ctx.normal_form(2, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
