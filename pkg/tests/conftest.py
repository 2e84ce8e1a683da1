import numpy as np
import pytest

from scfde.txchain import QamAlphabet, design_rrc


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def qpsk():
    return QamAlphabet.square(4)


@pytest.fixture(scope="session")
def qam16():
    return QamAlphabet.square(16)


@pytest.fixture(scope="session")
def qam64():
    return QamAlphabet.square(64)


@pytest.fixture(scope="session")
def rrc():
    return design_rrc(0.3, 20, 4)


def crandn(rng, *shape):
    """Unit-power circular complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


# acceptance verdicts, echoed once more at the end of the session
ACCEPTANCE: list = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
