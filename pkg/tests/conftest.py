import numpy as np
import pytest

from climarket.climate import CO2_COLUMNS, ForcingKind, load_series_csv, to_log_co2
from climarket.sim import bundled_data, bundled_paths


@pytest.fixture(scope="session")
def data():
    return bundled_data()


@pytest.fixture(scope="session")
def forcing(data):
    return data.forcing()


@pytest.fixture(scope="session")
def log_co2_hist():
    series = load_series_csv(bundled_paths()["co2"], CO2_COLUMNS)
    return to_log_co2(series).slice(1880, 2014)


def ar1_path(rng, n, rho, sigma, stationary_start=True):
    e = np.empty(n)
    prev = rng.normal(0.0, sigma / np.sqrt(1 - rho**2)) if stationary_start else 0.0
    for i in range(n):
        prev = rho * prev + rng.normal(0.0, sigma)
        e[i] = prev
    return e


@pytest.fixture
def co2_kind():
    return ForcingKind.LOG_CO2


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
