import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from majorant.fields import GridSpec

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid64():
    return GridSpec.square(64)


@pytest.fixture(scope="session")
def grid128():
    return GridSpec.square(128)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary: one line per criterion ------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the running acceptance test."""

    def note(text):
        request.node.user_properties.append(("detail", text))
        print(text)

    return note


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (report.when == "call" or report.failed):
        n = mark.args[0]
        passed = report.passed and _criteria.get(n, (True,))[0]
        text = "; ".join(v for k, v in item.user_properties if k == "detail")
        _criteria[n] = (passed, text)
    return report


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        passed, text = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {text}")
