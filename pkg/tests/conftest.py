import functools

import pytest

from mergedyn.merge_graph import GraphConfig, build_merge_graph


@functools.lru_cache(maxsize=None)
def graph(n, sister_cut=True, kinds="em,im,sm"):
    return build_merge_graph(n=n, kinds=kinds, config=GraphConfig(sister_cut=sister_cut))


@pytest.fixture(scope="session")
def g4():
    return graph(4)


@pytest.fixture(scope="session")
def g5():
    return graph(5)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
