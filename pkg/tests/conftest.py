import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wsscues import _backend

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@pytest.fixture(params=_backend.available())
def backend(request):
    """Every kernel backend importable here (the fallback always is)."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_probs(rng, k, h, w, dtype=np.float64):
    p = rng.random((k, h, w)) + 1e-3
    return (p / p.sum(axis=0, keepdims=True)).astype(dtype)


def random_image(rng, h, w):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
