import os
import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import cavitywp

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CONFIG_DIR = pathlib.Path(cavitywp.__file__).parent / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, n_channels, grid, width=2.0):
    """Smooth normalised random multichannel packet well inside the grid."""
    x = grid.x
    env = np.exp(-0.5 * (x / width) ** 2)
    amps = np.empty((n_channels, grid.n_points), dtype=complex)
    for c in range(n_channels):
        coeff = rng.normal(size=4) + 1j * rng.normal(size=4)
        amps[c] = env * sum(coeff[k] * x**k for k in range(4)) * np.exp(1j * rng.normal() * x)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
    return amps


# One line per acceptance criterion, filled by tests/test_acceptance.py and
# repeated at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
