import sys
from pathlib import Path

import pytest

# make the oracle helpers importable from every test module
sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, name): acceptance criterion with a printed verdict"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        number, name = marker.args
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {number} ({name}): {verdict}")
