"""Shared fixtures: tiny instances whose optima fit on a napkin."""

from __future__ import annotations

import pytest

from .instgen import build

# Five nodes on a ring 0-1-2-3-4-0 plus chords 0-2 and 2-4; unit
# capacities, one connection per edge.  Edge ids follow RING5_PAIRS.
RING5_PAIRS = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (0, 2), (2, 4)]

RING5_GRAPH = """\
NODES 5
label x y
s 0.0 0.0
a 1.0 0.0
v 2.0 0.0
c 3.0 0.0
t 4.0 0.0

EDGES 14
label src dest weight bw delay
edge_0 0 1 1 1 1
edge_1 1 0 1 1 1
edge_2 1 2 1 1 1
edge_3 2 1 1 1 1
edge_4 2 3 1 1 1
edge_5 3 2 1 1 1
edge_6 3 4 1 1 1
edge_7 4 3 1 1 1
edge_8 0 4 1 1 1
edge_9 4 0 1 1 1
edge_10 0 2 1 1 1
edge_11 2 0 1 1 1
edge_12 2 4 1 1 1
edge_13 4 2 1 1 1
"""


@pytest.fixture
def triangle():
    return build("triangle", 3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def ring5():
    return build("ring5", 5, RING5_PAIRS)


@pytest.fixture
def single():
    # one fat edge: capacity 10 split over 5 connections of 2 each
    return build("single", 2, [(0, 1)], capacity=10, connections=5)


@pytest.fixture
def diamond():
    # two disjoint two-hop routes 0-1-3 and 0-2-3 plus nothing else
    return build("diamond", 4, [(0, 1), (0, 2), (1, 3), (2, 3)])


@pytest.fixture
def path4():
    return build("path4", 4, [(0, 1), (1, 2), (2, 3)], capacity=10)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criteria verdict lines after the test run."""
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
