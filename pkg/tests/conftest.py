import hypothesis
import numpy as np
import pytest
import structlog

from armorbench.data import gen_synthetic
from armorbench.model import Arch, LinearClassifier, init_model

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.load_profile("default")

IMAGE_SHAPE = (3, 4, 4)


@pytest.fixture
def tiny_dataset():
    """60 synthetic 3x8x8 images over 3 classes."""
    return gen_synthetic(seed=11, n=60, k=3, h=8, w=8)


@pytest.fixture
def tiny_model():
    """Untrained 3-class model on 3x8x8 inputs."""
    arch = Arch(image_shape=(3, 8, 8), hidden_dim=16, embed_dim=8, num_classes=3)
    return init_model(arch, seed=3)


@pytest.fixture
def linear_model():
    """Seeded 4-class linear classifier on 3x4x4 inputs."""
    rng = np.random.default_rng(5)
    d = int(np.prod(IMAGE_SHAPE))
    return LinearClassifier(rng.normal(size=(4, d)), rng.normal(scale=0.1, size=4), IMAGE_SHAPE)


@pytest.fixture(autouse=True, scope="module")
def reset_logging():
    """CLI runs bind structlog to the stderr of the moment; drop it between modules."""
    yield
    structlog.reset_defaults()
