import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coopvlp.geometry import bundled_scenario

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def room3d():
    return bundled_scenario("scenario_paper_sec6")


@pytest.fixture(scope="session")
def room2d():
    return bundled_scenario("scenario_paper_sec6_2d")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance verdicts -------------------------------------------------------

_VERDICTS: dict[int, tuple[str, bool, str]] = {}


class _Verdict:
    def __init__(self):
        self.n = None

    def start(self, n: int, title: str) -> None:
        self.n = n
        _VERDICTS[n] = (title, False, "did not complete")

    def __call__(self, ok: bool, detail: str) -> bool:
        title = _VERDICTS[self.n][0]
        _VERDICTS[self.n] = (title, bool(ok), detail)
        return bool(ok)


@pytest.fixture
def verdict():
    return _Verdict()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        title, ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
