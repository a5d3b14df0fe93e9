import numpy as np
import pytest

from detflow.field import FieldMatrix
from detflow.network import GeneralRelayNetwork, LinearRelayNetwork, NodeFunction


def linear(nodes, edges, p=2, q=1, source="S", dests=("D",), **kw):
    """Linear network from ``{(u, v): matrix}`` with nested-list matrices."""
    gains = {e: FieldMatrix(p, m) for e, m in edges.items()}
    return LinearRelayNetwork(tuple(nodes), source, tuple(dests), p, q, gains, **kw)


def eye(q):
    return np.eye(q, dtype=int).tolist()


@pytest.fixture
def diamond():
    return linear("SABD", {("S", "A"): [[1, 0], [0, 1]], ("S", "B"): [[1, 0], [0, 0]],
                           ("A", "D"): [[1, 0], [0, 0]], ("B", "D"): [[1, 0], [0, 1]]}, q=2)


@pytest.fixture
def unequal_paths():
    """S -> D directly and through A; unit gains over F_2."""
    return linear("SAD", {("S", "D"): [[1]], ("S", "A"): [[1]], ("A", "D"): [[1]]})


@pytest.fixture
def two_hop():
    return linear("SAD", {("S", "A"): [[1]], ("A", "D"): [[1]]})


@pytest.fixture
def single_hop():
    return linear("SD", {("S", "D"): eye(2)}, q=2)


@pytest.fixture
def fig1():
    """Three hops: S; A1, A2; B1, B2; D with all cross edges between levels."""
    edges = {("S", "A1"): [[1]], ("S", "A2"): [[1]],
             ("A1", "B1"): [[1]], ("A1", "B2"): [[1]], ("A2", "B1"): [[1]], ("A2", "B2"): [[1]],
             ("B1", "D"): [[1]], ("B2", "D"): [[1]]}
    return linear(["S", "A1", "A2", "B1", "B2", "D"], edges)


@pytest.fixture
def or_network():
    """x_S in {0,1}^2 encoded as 0..3; D sees the OR of the two bits."""
    return GeneralRelayNetwork(("S", "D"), "S", ("D",), {"S": 4, "D": 1},
                               {"D": NodeFunction(("S",), (0, 1, 1, 1), 2)})


# acceptance summary: one line per criterion at the end of the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
