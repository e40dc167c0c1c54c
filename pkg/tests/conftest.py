import io

import numpy as np
import pytest

from coldpromo.network import ingest_edge_list

FIVE_EDGES = "u1 o1\nu1 o2\nu2 o1\nu2 o3\nu3 o2\n"

# Consistent with the small example network: user i bought alpha, beta,
# gamma (degrees 2, 3, 5); user j bought only alpha; p is the most active.
TWO_BUYER_EDGES = """\
i alpha
i beta
i gamma
j alpha
p beta
p gamma
p delta
p epsilon
u4 beta
u4 gamma
u5 gamma
u5 kappa
u6 gamma
u7 zeta
u8 theta
"""

ACCEPTANCE_LINES = []


@pytest.fixture
def five_edge():
    return ingest_edge_list(io.StringIO(FIVE_EDGES))


@pytest.fixture
def two_buyers():
    return ingest_edge_list(io.StringIO(TWO_BUYER_EDGES))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
