import pytest

from latentaudio import VaeHyperParams, init_model

TINY_HYPER = VaeHyperParams(
    window_size=8,
    latent_dim=2,
    hidden_sizes=(4,),
    epochs=2,
    batch_size=4,
    sample_rate=8000,
    seed=11,
)

SMALL_HYPER = VaeHyperParams(
    window_size=64,
    latent_dim=8,
    hidden_sizes=(16,),
    epochs=2,
    batch_size=8,
    sample_rate=8000,
    seed=5,
)


@pytest.fixture
def tiny_hyper():
    return TINY_HYPER


@pytest.fixture
def small_hyper():
    return SMALL_HYPER


@pytest.fixture
def small_model():
    return init_model(SMALL_HYPER)
