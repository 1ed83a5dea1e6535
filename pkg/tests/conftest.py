import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from drmlsad.core import DrMlsadProblem, ReturnsDataset, build_scenario_model
from drmlsad.data import SyntheticSpec, bench_defaults, gen_synthetic

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def hand_problem():
    data = ReturnsDataset([[1.0, 0.0], [0.0, 1.0]])
    return DrMlsadProblem(build_scenario_model(data), 0.1, 0.3)


def synthetic_problem(seed, n=50, m=20, epsilon=0.15):
    return bench_defaults(gen_synthetic(SyntheticSpec(n, m, seed=seed)), epsilon=epsilon)


def random_cset_args(rng, m):
    z = rng.standard_normal(m) * 2
    mu = rng.standard_normal(m)
    b = rng.uniform(mu.min() - 0.5, mu.max())
    return z, mu, b
