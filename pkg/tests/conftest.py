import numpy as np
import pytest

from lfblue import NetworkParams
from lfblue.channel import FadingModel, NetworkModel, sample_distances, sample_fading, sample_network


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_network(rng, k, total_power=0.01, prior_variance=1.0):
    return NetworkParams(
        obs_gains=rng.normal(1.0, 0.3, k),
        obs_noise_vars=rng.uniform(0.05, 0.15, k),
        chan_noise_vars=np.full(k, 1e-12),
        total_power=total_power,
        prior_variance=prior_variance,
    )


def default_network(rng, k, total_power=0.01):
    """Network and fading channels drawn from the default simulation model."""
    fading = FadingModel()
    params = sample_network(NetworkModel(), k, total_power, rng)
    d = sample_distances(fading, k, rng)
    return params, fading, d


def fading_draws(rng, fading, d, n):
    return sample_fading(fading, d, rng, size=n)


_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance.items(), key=lambda kv: kv[0]):
        name = nodeid.split("::")[-1]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
