import numpy as np
import pytest

from app import create_app, db
from config import TestingConfig
from entropic.grid import Grid, PhysicalParams


@pytest.fixture
def app():
    app = create_app(TestingConfig)
    with app.app_context():
        yield app
        db.session.remove()
        db.drop_all()


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def unit_params():
    return PhysicalParams(mass=1.0, hbar=1.0, dt=1e-3)


@pytest.fixture
def periodic_grid():
    """[0, 2π) with 64 cells."""
    return Grid(0.0, 2.0 * np.pi, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence(2024))
