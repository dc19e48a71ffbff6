import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def random_spd(gen, d, floor=0.1):
    a = gen.standard_normal((d, d))
    return a @ a.T / d + floor * np.eye(d)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(VERDICTS[key])
