"""
Shared fixtures: metrics, toy plants, loaded scenarios and the API client
"""

import os
import tempfile
from pathlib import Path

# The app reads DATABASE_URL at import time
_TEST_DB_DIR = Path(tempfile.mkdtemp(prefix="adsim-tests-"))
os.environ["DATABASE_URL"] = f"sqlite:///{_TEST_DB_DIR / 'runs.db'}"

import pytest

from app.core.geometry import MetricSpec
from app.models.zones import box
from app.services.fields import build_field
from app.services.plant import TruthPlant
from app.services.predictor import ModelSpec
from app.services.scenarios.loader import load_scenario

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


@pytest.fixture
def metric1():
    return MetricSpec.uniform(1)


@pytest.fixture
def metric2():
    return MetricSpec.uniform(2)


def make_plant(field: str, chart_half_width: float = 10.0, **params):
    drift, fibration = build_field(field, 1, params)
    chart = box([-chart_half_width], [chart_half_width])
    return TruthPlant(drift, fibration, chart, MetricSpec.uniform(1))


def make_model(plant: TruthPlant, step: float = 0.01) -> ModelSpec:
    return ModelSpec(plant.drift, plant.fibration, step, None, plant.metric)


@pytest.fixture
def static_plant():
    return make_plant("static")


@pytest.fixture
def linear_plant():
    return make_plant("linear", a=1.0)


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR


@pytest.fixture(scope="session")
def fig8_spec():
    return load_scenario("fig8_toy")


@pytest.fixture(scope="session")
def static_spec():
    return load_scenario("static_toy")


@pytest.fixture(scope="session")
def linear_spec():
    return load_scenario("linear_toy")


@pytest.fixture(scope="session")
def racing_spec():
    return load_scenario("racing")


@pytest.fixture(scope="session")
def boat_spec():
    return load_scenario("boat")


@pytest.fixture(scope="session")
def probe_spec():
    return load_scenario("probe")


@pytest.fixture
def client():
    from fastapi.testclient import TestClient

    from app.main import app

    with TestClient(app) as c:
        yield c
