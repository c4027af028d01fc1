import numpy as np
import pytest

from avforest.grid import figure_example_graph

# verdict lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fig_graph():
    """Three-site path with a doubled edge and one boundary half-edge at
    each end: d = (3, 3, 2), exactly 7 recurrent configurations."""
    return figure_example_graph()


# the seven recurrent configurations of the figure graph, as listed
FIG_RECURRENT = ["221", "220", "211", "210", "201", "121", "021"]

# permutation-process size pairs (|P_1|, |P_2|) for both boundary orders
FIG_TABLE = {
    (0, 1): {"221": (3, 0), "220": (2, 1), "211": (3, 0), "210": (2, 1),
             "201": (1, 2), "121": (0, 3), "021": (0, 3)},
    (1, 0): {"221": (0, 3), "220": (3, 0), "211": (2, 1), "210": (3, 0),
             "201": (2, 1), "121": (0, 3), "021": (1, 2)},
}

FIG_FOREST_MULTISET = {(3, 0): 2, (2, 1): 2, (1, 2): 1, (0, 3): 2}


def heights(text):
    return np.array([int(c) for c in text], dtype=np.int64)
