import math

import pytest

from amplify import hctransform as hc
from amplify.quatorder import BasisOrder

ACCEPTANCE: list[str] = []


def record(label: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")


@pytest.fixture(scope="session")
def order():
    return BasisOrder(3, 1, 1)


@pytest.fixture(scope="session")
def family():
    return hc.default_family()


@pytest.fixture(scope="session")
def cutoff(order):
    return hc.CutoffB(order.geodesic_length)


@pytest.fixture(scope="session")
def cprime(family, cutoff):
    return hc.support_bound(family.support_radius, cutoff)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
