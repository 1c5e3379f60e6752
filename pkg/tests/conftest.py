import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def geometric(a, q, n):
    w = q ** np.arange(1, n + 1)
    return a * w / w.sum()


@pytest.fixture
def example1():
    from cachefresh import SourceProfile, Topology

    return SourceProfile(geometric(10, 0.7, 15)), Topology.single_cache(5, 10, 15)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
