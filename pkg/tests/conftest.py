import numpy as np
import pytest

from qaclust.energy import MoGNIWModel, SquaredLossModel

# lines recorded by the acceptance suite, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_points():
    """Three 1-D points used by the exact small-instance checks."""
    return np.array([[0.0], [0.9], [3.0]])


@pytest.fixture(params=["mog_niw", "sq_loss"])
def model_cls(request):
    return {"mog_niw": MoGNIWModel, "sq_loss": SquaredLossModel}[request.param]
