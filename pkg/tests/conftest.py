import numpy as np
import pytest
from hypothesis import settings

from sensorsel import dynamics, sensing, tracking

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def signal():
    return sensing.SignalModel()


@pytest.fixture
def field36():
    return sensing.make_field()


@pytest.fixture
def model():
    return dynamics.build_motion_model(1.25, 2.5e-3)


@pytest.fixture
def small_field():
    """Six sensors on a 3 x 2 patch with distinct sensing probabilities."""
    pos = np.array([[-10.0, -5.0], [0.0, -5.0], [10.0, -5.0], [-10.0, 5.0], [0.0, 5.0], [10.0, 5.0]])
    return sensing.SensorField(pos, np.array([0.9, 0.3, 0.7, 0.5, 1.0, 0.15]))


@pytest.fixture
def small_cloud():
    prior = tracking.Prior.isotropic(mean=(0.0, 0.0, 1.0, 1.0), sigma_pos=3.0)
    return tracking.init_particles(prior, 300, np.random.default_rng(11))


@pytest.fixture
def default_cloud(model):
    rng = np.random.default_rng(3)
    cloud = tracking.init_particles(tracking.Prior.isotropic(), 2000, rng)
    return tracking.predict(cloud, model, rng)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
