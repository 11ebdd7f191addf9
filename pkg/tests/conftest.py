import numpy as np
import pytest

from romfom import pipeline
from romfom.burgers import BurgersConfig, simulate_reference


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def burgers_cfg():
    return BurgersConfig()


@pytest.fixture(scope="session")
def burgers_data(burgers_cfg):
    """Reference snapshots of the default periodic Burgers problem."""
    return simulate_reference(burgers_cfg)


@pytest.fixture(scope="session")
def pipeline_cfg():
    return pipeline.merge_config({})


@pytest.fixture(scope="session")
def burgers_model(pipeline_cfg, burgers_data, burgers_cfg):
    """Coupled model trained with the default hyperparameters, split at z = 5."""
    g = burgers_cfg.graph()
    dd = pipeline.build_decomposition(pipeline_cfg, g, burgers_cfg)
    return pipeline.train(pipeline_cfg, burgers_data, g, dd, seed=0)


def stable_matrix(rng, n, shift=0.5):
    """Random matrix with spectrum in Re(z) <= -shift."""
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    return M - (np.max(np.linalg.eigvals(M).real) + shift) * np.eye(n)
