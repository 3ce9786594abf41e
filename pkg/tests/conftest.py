import numpy as np
import pytest

from coverscan.image import GrayImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, w, h):
    return GrayImage(rng.random((h, w)))


@pytest.fixture
def random_image_factory(rng):
    def make(w, h):
        return random_image(rng, w, h)
    return make
