import warnings

import pytest

from vgcontract.model import Constant, Logistic, ModelParams


@pytest.fixture
def const_model():
    return ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Constant(0.5))


@pytest.fixture
def sync_model():
    """Logistic G with ||G'|| = 0.5: synchronous contraction margin 0.5."""
    return ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(1.0, 1.0, 2.0, 0.5))


@pytest.fixture
def steep_model():
    """Steep logistic with ||G'|| = 5.2, synchronous condition violated."""
    return ModelParams(0.0, 1.0, 1.0, 1.0, 0.3, Logistic(0.2, 2.6, 8.0, 0.5))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
