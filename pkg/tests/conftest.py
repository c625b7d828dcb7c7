import numpy as np
import pytest

from scatkit import (
    BoundaryMode,
    ColorSpace,
    ImageGrid,
    ScatteringConfig,
    build_filterbank,
)


@pytest.fixture(scope="session")
def cfg_small():
    return ScatteringConfig(
        J=2, L=4, boundary=BoundaryMode.PERIODIC, precision="double"
    )


@pytest.fixture(scope="session")
def fb_small(cfg_small):
    return build_filterbank(16, cfg_small.J, cfg_small.L, cfg_small.resolved_params)


@pytest.fixture(scope="session")
def cfg_l8():
    return ScatteringConfig(J=2, L=8, boundary=BoundaryMode.PERIODIC)


@pytest.fixture(scope="session")
def fb_l8_32(cfg_l8):
    return build_filterbank(32, cfg_l8.J, cfg_l8.L, cfg_l8.resolved_params)


def random_image(rng, n, channels=1, dtype=np.float64):
    space = ColorSpace.GRAY if channels == 1 else ColorSpace.RGB
    return ImageGrid(rng.random((channels, n, n)).astype(dtype), space)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
