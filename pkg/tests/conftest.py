import sys
from pathlib import Path

import pytest

from osdf.controller import Controller
from osdf.dataplane import SimNetwork
from osdf.topo import gen_linear, gen_three_region

sys.path.insert(0, str(Path(__file__).parent))

PAPER_POLICIES = [
    "inter web from A to B priority 100",
    "inter ping from B to C",
    "intra video region A,C priority 300",
]


@pytest.fixture
def three_region():
    return gen_three_region()


@pytest.fixture
def linear5():
    return gen_linear(5)


@pytest.fixture
def scenario(three_region):
    """Controller + network on the three-region fixture with the example policies."""
    from osdf.policy import parse_policy

    ctrl = Controller(three_region)
    net = ctrl.attach(SimNetwork(three_region))
    for line in PAPER_POLICIES:
        ctrl.add_policy(net, parse_policy(line))
    return ctrl, net


# -- acceptance summary -----------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    num, title = marker.args
    failed = call.excinfo is not None
    prev = _criteria.get(num, (title, True))
    _criteria[num] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {title}")
