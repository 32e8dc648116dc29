import numpy as np
import pytest

from pmdpsynth.io import bundled_model_path, load_model, parse_spec


@pytest.fixture(scope="session")
def fig2():
    return load_model(bundled_model_path())


@pytest.fixture
def spec_of(fig2):
    return lambda text: parse_spec(text, fig2.labels, fig2.num_states)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
