import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from csqpt import fock, oracles, proctensor
from csqpt.phasespace import GridSpec

settings.register_profile("csqpt", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("csqpt")

PROBE_AMPLITUDES = np.linspace(0.0, 8.0, 11)


def random_density(dim, seed, rank=None):
    rng = np.random.default_rng(seed)
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def noiseless_probes(spec, amplitudes=PROBE_AMPLITUDES):
    dim = fock.required_dim(max(amplitudes)) + 2
    return [proctensor.ProbeRecord(a, oracles.eom_process(fock.coherent_state(a, dim), spec)) for a in amplitudes]


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def eom_fit():
    return proctensor.center_and_fit(noiseless_probes(oracles.EOM_CHANNEL), centered_dim=12)


@pytest.fixture(scope="session")
def identity_fit():
    return proctensor.center_and_fit(noiseless_probes(oracles.ChannelSpec(1.0, 0.0)), centered_dim=12)


@pytest.fixture(scope="session")
def eom_sop6(eom_fit, grid):
    return proctensor.reconstruct_superoperator(eom_fit, 5.2, grid, 6)


@pytest.fixture(scope="session")
def identity_sop4(identity_fit, grid):
    return proctensor.reconstruct_superoperator(identity_fit, 5.2, grid, 4)


@pytest.fixture
def report(request):
    """Write a line to the terminal even while output is captured."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(line):
        if reporter is None:
            print(line)
        else:
            reporter.write_line(line)

    return emit
