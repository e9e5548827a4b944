"""Shared fixtures: schedules, priors, and session-cached trained nets."""

import numpy as np
import pytest

from das import NoiseSchedule, TrainConfig, canonical_prior_2d, train_denoiser
from das.gmm import isotropic_gmm


@pytest.fixture(scope="session")
def schedule():
    return NoiseSchedule.linear()


@pytest.fixture(scope="session")
def prior_2d():
    return canonical_prior_2d()


@pytest.fixture(scope="session")
def single_gaussian_2d():
    return isotropic_gmm(np.zeros((1, 2)), 1.0)


@pytest.fixture(scope="session")
def trained_net_2d(schedule, prior_2d):
    """The toy pre-trained model: trained once per session at paper defaults."""
    data = prior_2d.sample(8192, 123)
    net, losses = train_denoiser(data, schedule, TrainConfig(seed=0))
    return net, losses
