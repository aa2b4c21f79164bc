import time

import pytest

from kriging_reliability.experiments import (
    preset,
    run_deterministic_experiment,
    run_gp_baseline,
    run_power_rate_study,
    run_stochastic_experiment,
)

import acceptance_log


def _timed(func, config):
    start = time.perf_counter()
    result = func(config, workers=1)
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def deterministic_run():
    return _timed(run_deterministic_experiment, preset("deterministic"))


@pytest.fixture(scope="session")
def stochastic_run():
    return _timed(run_stochastic_experiment, preset("stochastic"))


@pytest.fixture(scope="session")
def baseline_run():
    return _timed(run_gp_baseline, preset("gp-baseline"))


@pytest.fixture(scope="session")
def power_run():
    return _timed(run_power_rate_study, preset("power-rate"))


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[key])
