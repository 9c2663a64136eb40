import functools

import pytest
from hypothesis import HealthCheck, settings

from renewcoin.renewal import builtin_law

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def cached_law(name, H, **params):
    """Builtin laws are immutable, so tests share them."""
    return builtin_law(name, H, **params)


@pytest.fixture(scope="session")
def law_cache():
    return cached_law


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
