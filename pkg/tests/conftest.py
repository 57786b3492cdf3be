import sys

import pytest

from icc.elaborate import TypeError_, check
from icc.metatheory import enumerate_core_terms, enumerate_types
from icc.syntax import EMPTY_CTX

# derivation trees for size-9 terms nest a few hundred frames deep
sys.setrecursionlimit(20000)


def elaborate_all(terms, types):
    out = []
    for e in terms:
        for a in types:
            try:
                _, d = check(EMPTY_CTX, e, a)
            except TypeError_:
                continue
            out.append(d)
    return out


@pytest.fixture(scope="session")
def core_terms():
    return list(enumerate_core_terms(5))


@pytest.fixture(scope="session")
def core_types():
    return enumerate_types(3)


@pytest.fixture(scope="session")
def core_derivations(core_terms, core_types):
    return elaborate_all(core_terms, core_types)


_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
