import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from leakdoa import make_scenario, true_subspace_model

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# two sources at 35 and 37 degrees, ten sensors at half-wavelength spacing, ten snapshots
DOAS_DEG = (35.0, 37.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(params=[0.0, 0.9], ids=["r0", "r0.9"])
def reference_model(request):
    return true_subspace_model(make_scenario(15.0, DOAS_DEG, correlation=request.param))


def random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + z.conj().T) / 2


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
