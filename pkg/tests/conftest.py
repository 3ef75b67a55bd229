import numpy as np
import pytest

from dipole_jumps.model import SystemSpec

# Hg+ reference parameters: A1 = A2 = 1/s, A3 = 4e8/s, Omega3 = 5e7/s, Delta3 = 0
HG_REF = dict(A1=1.0, A2=1.0, A3=4e8, omega3=5e7, delta3=0.0)
R_GRID = (0.5, 1, 2, 5, 10, 20)
DETUNINGS = (0.0, 4e7, -4e7)


@pytest.fixture
def hg():
    spec = SystemSpec.two_d(**HG_REF)
    return spec.with_distance(spec.wavelengths[3])


@pytest.fixture
def four():
    spec = SystemSpec.four_level()
    return spec.with_distance(spec.wavelengths[3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rho(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        print(line)
        request.config._acceptance_lines.append(line)
        assert ok, line

    return record
