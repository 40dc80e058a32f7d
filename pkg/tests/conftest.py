import numpy as np
import pytest

from hazard_bayes.model import InningsRecord
from hazard_bayes.nested import NSConfig

# acceptance criterion number -> (description, outcome)
_ACCEPTANCE: dict[int, list] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, description = marker.args
    entry = _ACCEPTANCE.setdefault(number, [description, "PASS"])
    # a criterion fails if any of its phases (setup/call/teardown) fails
    if call.excinfo is not None:
        if call.excinfo.errisinstance(pytest.skip.Exception):
            if entry[1] == "PASS":
                entry[1] = "SKIP"
        else:
            entry[1] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        description, outcome = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {outcome:4s}  {description}")


@pytest.fixture
def small_config():
    return NSConfig(n_particles=100, mcmc_steps=100, seed=11)


@pytest.fixture
def tiny_config():
    return NSConfig(n_particles=30, mcmc_steps=20, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_career():
    scores = [0, 4, 12, 33, 7, 51, 2, 0, 18, 96, 23, 1, 40, 9, 15]
    flags = [False] * 15
    flags[3] = flags[9] = True
    return [InningsRecord(s, f) for s, f in zip(scores, flags)]
