"""Shared fixtures."""

import logging

import numpy as np
import pytest

from aniso.core.models import DatasetObjective, DatasetSpec, MlpModel, synth_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_objective():
    """Small two-class MLP problem, cheap enough for many training rounds."""
    data = synth_dataset(DatasetSpec("two_gaussians", 40, 0.3), seed=3)
    return DatasetObjective(MlpModel((2, 4, 2)), data)


@pytest.fixture(autouse=True)
def quiet_aniso_logger():
    logger = logging.getLogger("aniso")
    handlers = list(logger.handlers)
    yield
    logger.handlers = handlers
