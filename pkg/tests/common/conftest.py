import json

import numpy as np
import pytest

from srbayes.inference import run_mcmc
from srbayes.io import BirthRecord, SrbObservation, TfrSeries, write_birth_records, write_observations, write_tfr
from srbayes.models import McmcSettings, ModelConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the statistical recovery tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical recovery test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def mock_config():
    return ModelConfig(year_range=(2000, 2009), projection_end=2020)


@pytest.fixture(scope="session")
def mock_settings():
    return McmcSettings(n_chains=2, n_iterations=400, n_burnin=200, thin=2, seed=3, adapt_window=25)


@pytest.fixture(scope="session")
def mock_tfr_series():
    # Linear decline from 5.0 in 1980 to 2.0 in 2010, flat afterwards
    return [
        TfrSeries(region, {year: max(5. - 0.1 * (year - 1980) + shift, 1.5) for year in range(1980, 2051)})
        for region, shift in (("P1", 0.), ("P2", -0.5))
    ]


@pytest.fixture(scope="session")
def mock_tfr(tmpdir_factory, mock_tfr_series):
    fn = str(tmpdir_factory.mktemp("data").join("tfr.csv"))
    write_tfr(mock_tfr_series, fn)
    return fn


@pytest.fixture(scope="session")
def mock_observations():
    rng = np.random.default_rng(42)
    observations = []
    for region, trend in (("P1", 0.), ("P2", 0.004)):
        for year in range(2000, 2010):
            ratio = (1.049 + trend * (year - 2000)) * np.exp(0.015 * rng.standard_normal())
            source = "S1" if year < 2005 else "S2"
            observations.append(SrbObservation(region, year, year, ratio, 0.02, 10000, source))
    return observations


@pytest.fixture(scope="session")
def mock_observations_file(tmpdir_factory, mock_observations):
    fn = str(tmpdir_factory.mktemp("data").join("observations.csv"))
    write_observations(mock_observations, fn)
    return fn


@pytest.fixture(scope="session")
def mock_births(tmpdir_factory):
    rng = np.random.default_rng(0)
    records = []
    for region in ("P1", "P2"):
        for year in range(1995, 2010):
            for cluster in range(8):
                for _ in range(30):
                    sex = "M" if rng.random() < 1.05 / 2.05 else "F"
                    records.append(BirthRecord(region, year, f"C{cluster}", "S1", 1. + (cluster % 3) / 10, sex,
                                               "NDHS2010", 2010))
    # Born 26 years before the survey
    records.append(BirthRecord("P1", 1984, "C0", "S1", 1., "F", "NDHS2010", 2010))
    fn = str(tmpdir_factory.mktemp("data").join("births.csv"))
    write_birth_records(records, fn)
    return fn


@pytest.fixture(scope="session")
def mock_config_file(tmpdir_factory, mock_config):
    fn = str(tmpdir_factory.mktemp("data").join("config.json"))
    with open(fn, 'w') as f:
        json.dump(mock_config.model_dump(mode='json'), f)
    return fn


@pytest.fixture(scope="session")
def mock_settings_file(tmpdir_factory):
    fn = str(tmpdir_factory.mktemp("data").join("settings.json"))
    with open(fn, 'w') as f:
        json.dump(dict(n_chains=2, n_iterations=200, n_burnin=100, thin=2, adapt_window=25), f)
    return fn


@pytest.fixture(scope="session")
def mock_draws(mock_observations, mock_tfr_series, mock_config, mock_settings):
    return run_mcmc(mock_observations, mock_tfr_series, mock_config, mock_settings, threads=1)
