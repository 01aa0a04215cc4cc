import numpy as np
import pytest

from rcdlmc import make_glm_posterior, make_isotropic_gaussian, synth_glm_data
from rcdlmc.potentials import DoubleGaussian


@pytest.fixture
def gauss10():
    return make_isotropic_gaussian(10)


@pytest.fixture(scope="session")
def glm10():
    return make_glm_posterior(synth_glm_data(10, 20, x_true=1.0, seed=11))


@pytest.fixture(scope="session")
def glm_cos10():
    return make_glm_posterior(synth_glm_data(10, 20, x_true=1.0, noise_model="cosine_perturbed", seed=12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def all_targets():
    return [
        make_isotropic_gaussian(6, center=0.3),
        DoubleGaussian(6, offset=2.0),
        make_glm_posterior(synth_glm_data(6, 15, seed=3)),
        make_glm_posterior(synth_glm_data(6, 15, noise_model="cosine_perturbed", seed=4)),
    ]
