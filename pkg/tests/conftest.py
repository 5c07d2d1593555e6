"""Shared fixtures. Trained agent banks are session-scoped: training them is
the expensive part of the suite, and several modules check the same banks."""

import os
import time

import pytest

from fsosched import (
    BernoulliSampled,
    DqnHyperparams,
    EnvFactory,
    GaussianVolume,
    HistoricalWeather,
    Scenario,
    UniformSyntheticWeather,
    ingest_weather_csv,
    make_equal_plan,
    train_bank,
)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

# The case-study plan starts at 2024-03-01T00:00:00Z to sit inside the
# station traces, which begin at the same instant.
CASE_EPOCH = 1709251200.0


@pytest.fixture(scope="session")
def synthetic_plan():
    return make_equal_plan(10, 30)


@pytest.fixture(scope="session")
def synthetic_factory(synthetic_plan):
    template = Scenario(
        synthetic_plan, 30, UniformSyntheticWeather(), GaussianVolume(), seed=2024
    )
    return EnvFactory(template)


@pytest.fixture(scope="session")
def synthetic_bank_timed(synthetic_factory):
    t0 = time.time()
    bank = train_bank(synthetic_factory, seed=0)
    return bank, time.time() - t0


@pytest.fixture(scope="session")
def synthetic_bank(synthetic_bank_timed):
    return synthetic_bank_timed[0]


@pytest.fixture(scope="session")
def case_plan():
    return make_equal_plan(10, 30, ground_station="gs-0", start_unix_s=CASE_EPOCH)


@pytest.fixture(scope="session")
def trace_a():
    path = os.path.join(DATA_DIR, "station_a.csv")
    return HistoricalWeather({"gs-0": ingest_weather_csv(path, "gs-0")})


@pytest.fixture(scope="session")
def trace_b():
    path = os.path.join(DATA_DIR, "station_b.csv")
    return HistoricalWeather({"gs-0": ingest_weather_csv(path, "gs-0")})


@pytest.fixture(scope="session")
def case_bank(case_plan, trace_a):
    factory = EnvFactory(Scenario(case_plan, 30, trace_a, BernoulliSampled(), seed=2024))
    return train_bank(factory, seed=0)


@pytest.fixture(scope="session")
def small_factory():
    plan = make_equal_plan(12, 10)
    template = Scenario(plan, 12, UniformSyntheticWeather(), GaussianVolume(), seed=77)
    return EnvFactory(template)


@pytest.fixture(scope="session")
def small_bank(small_factory):
    hyper = DqnHyperparams(
        episodes=1500, min_episodes=500, val_every=250, val_episodes=50, plateau_patience=4
    )
    return train_bank(small_factory, hyper=hyper, seed=0)
