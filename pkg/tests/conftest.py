from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from triobs.exprdsl import parse_system

ROOT = Path(__file__).resolve().parents[1]
SYSTEMS = ROOT / "systems"
CONFIGS = ROOT / "configs"

settings.register_profile(
    "repo", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def load(name):
    return parse_system((SYSTEMS / f"{name}.sys").read_text())


@pytest.fixture(scope="session")
def ex1():
    return load("example1")


@pytest.fixture(scope="session")
def ex2():
    return load("example2")


@pytest.fixture(scope="session")
def a3():
    return load("synthetic_a3")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
