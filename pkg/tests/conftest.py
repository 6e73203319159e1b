import numpy as np
import pytest

from didlab import kernels
from didlab.dgp import NoiseSwitches, ScenarioSpec, generate

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel():
    spec = ScenarioSpec.protocol_default("s2", n_units=40, master_seed=3)
    return generate(spec)


def outcome_free_panel(scenario, process=None, n_units=60, seed=0, **noise):
    spec = ScenarioSpec.protocol_default(scenario, process, n_units=n_units, master_seed=seed)
    switches = NoiseSwitches(unit_intercept_sd=0.0, outcome_error_sd=0.0, covariate_noise_sd=0.0, **noise)
    return generate(spec, switches)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
