import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from linescatter import PotentialGrid, TransferMatrix

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def bump(amp=1.5, c=0.0, w=1.0, S=1.0, n=200):
    """Smooth compactly supported bump ``amp * e * exp(-1 / (1 - ((x - c) / w)^2))``."""

    def f(x):
        u = np.clip((np.asarray(x) - c) / w, -0.999999, 0.999999)
        return amp * np.e * np.exp(-1.0 / (1.0 - u**2)) * (np.abs(np.asarray(x) - c) < w)

    return PotentialGrid.from_function(f, S, n=n)


def free_AB(M, xi):
    """``A`` and ``B`` of the zero potential by matching free exponentials at the origin."""
    m11, m12, m21, m22 = M.m11, M.m12, M.m21, M.m22
    A = (m11 + m22) / 2 - 1j * xi * m12 / 2 + 1j * m21 / (2 * xi)
    B = (m22 - m11) / 2 + 1j * xi * m12 / 2 + 1j * m21 / (2 * xi)
    return A, B


@pytest.fixture
def q0():
    return PotentialGrid.zero(1.0)


@pytest.fixture
def qbump():
    return bump()


@pytest.fixture
def Mdiag():
    return TransferMatrix(2.0, 0.0, 0.0, 0.5)


@pytest.fixture
def Moff():
    return TransferMatrix(1.0, 1.0, 0.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
