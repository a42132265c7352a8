"""Shared fixtures: models are expensive to assemble, so build once."""

import numpy as np
import pytest

from semired.chx import ModelConfig, build_model, default_config


@pytest.fixture(scope="session")
def default_model():
    return build_model(default_config())


@pytest.fixture(scope="session")
def small_model():
    return build_model(ModelConfig(n_cells=16, t_end=0.02, n_steps=10))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
