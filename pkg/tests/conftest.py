import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "opcalc",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("opcalc")

ACCEPTANCE_LINES = []


def random_complex(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)


def well_conditioned(rng, n, spread=0.3):
    """``I + E`` with a small random ``E``; condition stays modest."""
    e = random_complex(rng, n) / np.sqrt(n)
    return np.eye(n) + spread * e


def with_spectrum(rng, values, spread=0.3):
    v = well_conditioned(rng, len(values), spread)
    return v @ np.diag(values) @ np.linalg.inv(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
