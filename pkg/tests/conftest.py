import json
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

settings.register_profile("default", max_examples=60, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def frozen():
    return json.loads((HERE / "frozen_values.json").read_text())


def fixture_path(name):
    from importlib import resources

    return resources.files("ffnetlab.fixtures").joinpath(name)


def load_fixture_json(name):
    return json.loads(fixture_path(name).read_text())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
