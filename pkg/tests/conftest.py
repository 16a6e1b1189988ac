import re

import numpy as np
import pytest

from otlab.domain import Domain
from otlab.measures import DensityGrid


@pytest.fixture
def unit():
    return Domain.interval(0.0, 1.0, 401)


@pytest.fixture
def uniform(unit):
    return DensityGrid.uniform(unit)


def smooth_density(rng, dom, amp=0.5, modes=3):
    """Random positive cosine series on an interval."""
    x = (dom.mesh.x - dom.mesh.x[0]) / (dom.mesh.x[-1] - dom.mesh.x[0])
    c = rng.uniform(-1, 1, modes)
    c *= amp / np.sum(np.abs(c))
    vals = 1 + sum(ck * np.cos(np.pi * (k + 1) * x + rng.uniform(0, 6.3)) for k, ck in enumerate(c))
    return DensityGrid(dom, vals)


# one summary line per acceptance criterion ---------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_ac(\d+)", report.nodeid)
    if not m or not (report.when == "call" or report.failed or report.skipped):
        return
    k = int(m.group(1))
    ok, notes = _CRITERIA.get(k, (True, []))
    notes += [v for key, v in report.user_properties if key == "measured"]
    _CRITERIA[k] = (ok and report.passed, notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, notes = _CRITERIA[k]
        terminalreporter.write_line(f"AC{k:<3d}{'PASS' if ok else 'FAIL'}  {'; '.join(notes)}")
